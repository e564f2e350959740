#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "fixtures.hpp"

using namespace streamsum;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(STREAMSUM_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// One synthetic benchmark and one trained model shared by the suite.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fixtures::TempDir();
    write(path("config.json"), R"({
      "synthetic": {"num_queries": 3, "stream_length": 30, "nuggets_per_query": 4,
                    "event_corpus_sentences": 60, "general_filler_sentences": 80, "seed": 5},
      "features": {"latent_k": 10},
      "lols": {"passes": 1, "samples_per_event": 1}
    })");
    ASSERT_EQ(cli(cfg() + "synth --out " + path("data")), 0);
    ASSERT_EQ(cli(cfg() + "train " + data() + " --out-model " + path("model.json")), 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string path(const std::string& name) { return (*dir_ / name).string(); }
  static std::string cfg() { return "--config " + path("config.json") + " "; }
  static std::string data() {
    return "--queries " + path("data/queries.json") + " --streams " + path("data/streams") + " --judgments " +
           path("data/judgments") + " --event-lm " + path("data/event_lm") + " --general-lm " +
           path("data/general_lm");
  }
  static std::string run_args() {
    return "--queries " + path("data/queries.json") + " --streams " + path("data/streams") + " --model " +
           path("model.json");
  }

  static fixtures::TempDir* dir_;
};

fixtures::TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli(""), 1);
  EXPECT_EQ(cli("frobnicate"), 1);
  EXPECT_EQ(cli("run --out " + path("x.jsonl")), 1);
  EXPECT_EQ(cli(cfg() + "run " + run_args() + " --system nonsense --out " + path("x.jsonl")), 1);
  EXPECT_EQ(cli(cfg() + "run " + run_args() + " --system oracle --out " + path("x.jsonl")), 1);
  write(path("bad_queries.json"), "{not json");
  EXPECT_EQ(cli("evaluate --updates " + path("bad_queries.json") + " --queries " + path("bad_queries.json") +
                " --judgments " + path("data/judgments")),
            1);
  write(path("diverge.json"), R"({"features": {"latent_k": 10}, "lols": {"passes": 1, "samples_per_event": 1, "eta": 1e12}})");
  EXPECT_EQ(cli("--config " + path("diverge.json") + " train " + data() + " --out-model " + path("never.json")), 2);
  EXPECT_FALSE(std::filesystem::exists(path("never.json")));
}

TEST_F(Cli, FilterOnEmptyInput) {
  write(path("empty_docs.jsonl"), "");
  write(path("one_query.json"), R"([{"id":"q","start":0,"end":100,"keywords":["storm"]}])");
  ASSERT_EQ(cli("filter --docs " + path("empty_docs.jsonl") + " --queries " + path("one_query.json") + " --out " +
                path("filtered.jsonl")),
            0);
  EXPECT_TRUE(read_file(path("filtered.jsonl")).empty());
  EXPECT_TRUE(std::filesystem::exists(path("filtered.jsonl.manifest.json")));
}

TEST_F(Cli, RunsAreDeterministic) {
  ASSERT_EQ(cli(cfg() + "train " + data() + " --out-model " + path("model2.json")), 0);
  EXPECT_EQ(read_file(path("model.json")), read_file(path("model2.json")));
  for (const char* system : {"ls", "lscos", "cos", "apsal"}) {
    const std::string a = path(std::string("a_") + system + ".jsonl"), b = path(std::string("b_") + system + ".jsonl");
    ASSERT_EQ(cli(cfg() + "run " + run_args() + " --system " + system + " --out " + a), 0) << system;
    ASSERT_EQ(cli(cfg() + "run " + run_args() + " --system " + system + " --out " + b), 0) << system;
    EXPECT_EQ(read_file(a), read_file(b)) << system;
  }
}

TEST_F(Cli, EvaluateEmptyUpdateFile) {
  write(path("no_updates.jsonl"), "");
  ASSERT_EQ(cli("evaluate --updates " + path("no_updates.jsonl") + " --queries " + path("data/queries.json") +
                " --judgments " + path("data/judgments") + " --report " + path("empty_report.json")),
            0);
  auto j = json::parse(read_file(path("empty_report.json")));
  EXPECT_EQ(j["events"].size(), 3u);
  EXPECT_EQ(j["macro_average"]["f1"].get<double>(), 0.0);
}

TEST_F(Cli, OracleRunMatchesLibraryTrace) {
  ASSERT_EQ(cli(cfg() + "run " + run_args() + " --judgments " + path("data/judgments") +
                " --system oracle --out " + path("oracle.jsonl")),
            0);
  auto written = load_updates(path("oracle.jsonl"));
  const auto bundle = bundle_from_json(json::parse(read_file(path("model.json"))));
  for (const auto& q : load_queries(path("data/queries.json"))) {
    const auto ev = load_event(q, path("data/streams"), path("data/judgments"));
    auto ps = prepare_event(ev, bundle.resources);
    OraclePolicy oracle;
    const auto expected = updates_of(ps, run_policy(ps, oracle));
    const auto& got = written[q.id];
    ASSERT_EQ(got.size(), expected.size()) << q.id;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].doc_id, expected[i].doc_id);
      EXPECT_EQ(got[i].sent_index, expected[i].sent_index);
      EXPECT_EQ(got[i].time, expected[i].time);
    }
  }
}

TEST_F(Cli, ManifestsAccompanyOutputs) {
  EXPECT_TRUE(std::filesystem::exists(path("model.json.manifest.json")));
  ASSERT_EQ(cli(cfg() + "run " + run_args() + " --system cos --out " + path("m.jsonl")), 0);
  auto m = json::parse(read_file(path("m.jsonl.manifest.json")));
  EXPECT_TRUE(m.contains("config"));
  EXPECT_TRUE(m.contains("inputs"));
}
