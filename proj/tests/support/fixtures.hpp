#ifndef STREAMSUM_TEST_FIXTURES_HPP
#define STREAMSUM_TEST_FIXTURES_HPP

// Small builders shared by the unit and acceptance suites.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "streamsum.hpp"

namespace fixtures {

using namespace streamsum;

inline std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

inline Sentence sent(const std::string& doc, int idx, Timestamp ts, const std::string& text,
                     std::vector<NeTag> tags = {}) {
  Sentence s;
  s.doc_id = doc;
  s.sent_index = idx;
  s.timestamp = ts;
  s.tokens = words(text);
  s.ne_tags = tags.empty() ? std::vector<NeTag>(s.tokens.size(), NeTag::None) : std::move(tags);
  s.raw_text = text;
  return s;
}

inline Document doc(const std::string& id, Timestamp ts, const std::vector<std::string>& sentences) {
  Document d;
  d.doc_id = id;
  d.timestamp = ts;
  for (std::size_t i = 0; i < sentences.size(); ++i) d.sentences.push_back(sent(id, static_cast<int>(i), ts, sentences[i]));
  return d;
}

inline Query query(const std::string& id, std::vector<std::string> keywords, Timestamp start = 0,
                   Timestamp end = 1'000'000, const std::string& type = "storm") {
  Query q;
  q.id = id;
  q.text = id;
  q.event_type = type;
  q.start = start;
  q.end = end;
  q.keywords = std::move(keywords);
  return q;
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("streamsum-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// A small synthetic benchmark for tests that need judged streams.
inline SyntheticConfig small_synthetic(std::size_t queries = 4, std::size_t length = 40, std::uint64_t seed = 3) {
  SyntheticConfig c;
  c.num_queries = queries;
  c.stream_length = length;
  c.nuggets_per_query = 5;
  c.event_corpus_sentences = 80;
  c.general_filler_sentences = 120;
  c.seed = seed;
  return c;
}

inline FeatureConfig small_features() {
  FeatureConfig f;
  f.latent_k = 20;
  return f;
}

/// Judged event with a handful of sentences and explicit nugget matches.
/// `matches[i]` lists nugget indices matched by sentence i; each sentence is
/// its own document.
inline EventData toy_event(const std::vector<std::vector<int>>& matches, std::size_t num_nuggets,
                           const std::string& id = "toy", Timestamp start = 1000, Timestamp step = 600) {
  EventData ev;
  ev.query = query(id, {"alpha"}, start, start + step * static_cast<Timestamp>(matches.size() + 10));
  for (std::size_t n = 0; n < num_nuggets; ++n)
    ev.nuggets.push_back({"n" + std::to_string(n), id, "nugget " + std::to_string(n), start});
  std::vector<Sentence> sentences;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    std::string text = "alpha word" + std::to_string(i) + " filler";
    for (int n : matches[i]) text += " sig" + std::to_string(n);
    auto s = sent("d" + std::to_string(100 + i), 0, start + static_cast<Timestamp>(i) * step, text);
    ev.judgments.add(s.key());
    for (int n : matches[i]) ev.judgments.add(s.key(), "n" + std::to_string(n));
    sentences.push_back(s);
  }
  ev.stream = make_stream(id, sentences);
  return ev;
}

/// Judged prepared stream carrying only what the oracle reads.
inline PreparedStream oracle_stream(const std::vector<std::vector<int>>& matches, std::size_t num_nuggets) {
  auto ev = toy_event(matches, num_nuggets);
  PreparedStream ps;
  ps.query_id = ev.query.id;
  ps.stream = ev.stream;
  ps.base.resize(matches.size());
  ps.nuggets = matches;
  ps.num_nuggets = num_nuggets;
  ps.judged = true;
  return ps;
}

/// Random match lists for stream generators.
inline std::vector<std::vector<int>> random_matches(std::mt19937_64& rng, std::size_t length, int num_nuggets,
                                                    double match_rate = 0.4) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> nug(0, num_nuggets - 1);
  std::vector<std::vector<int>> out(length);
  for (auto& m : out) {
    if (unit(rng) < match_rate) {
      m.push_back(nug(rng));
      if (unit(rng) < 0.3) {
        int extra = nug(rng);
        if (extra != m.front()) m.push_back(extra);
      }
    }
  }
  return out;
}

inline Resources toy_resources(std::span<const EventData> events, int k = 4) {
  TextCorpora corpora;
  FeatureConfig f;
  f.latent_k = k;
  f.tree.min_leaf = 1;
  return build_resources(events, corpora, f);
}


/// Random judged run: nuggets with report times, judgments and updates
/// (possibly repeated, possibly unjudged).
struct RandomRun {
  Query query;
  std::vector<Nugget> nuggets;
  JudgmentSet judgments;
  std::vector<Update> updates;
};

inline RandomRun random_run(std::mt19937_64& rng, double window, int max_nuggets = 8, int max_updates = 20) {
  std::uniform_int_distribution<int> num_nuggets(1, max_nuggets), num_sentences(1, 30), num_updates(0, max_updates);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomRun r;
  r.query = query("rq", {"x"});
  const int m = num_nuggets(rng);
  const auto span = static_cast<Timestamp>(window * 2);
  std::uniform_int_distribution<Timestamp> when(0, span);
  for (int i = 0; i < m; ++i) r.nuggets.push_back({"n" + std::to_string(i), "rq", "", when(rng)});
  const int ns = num_sentences(rng);
  std::uniform_int_distribution<int> pick_nugget(0, m - 1), pick_sentence(0, ns - 1);
  for (int i = 0; i < ns; ++i) {
    SentenceKey k{"d" + std::to_string(i / 3), i % 3};
    if (unit(rng) < 0.1) continue;  // unjudged
    r.judgments.add(k);
    while (unit(rng) < 0.45) r.judgments.add(k, "n" + std::to_string(pick_nugget(rng)));
  }
  const int nu = num_updates(rng);
  for (int u = 0; u < nu; ++u) {
    const int i = pick_sentence(rng);
    r.updates.push_back({"rq", "d" + std::to_string(i / 3), i % 3, when(rng) + span / 2, ""});
  }
  return r;
}

}  // namespace fixtures

#endif
