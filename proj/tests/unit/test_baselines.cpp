#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace streamsum;
using fixtures::sent;

namespace {

DenseVector v2(double a, double b) {
  DenseVector v(2);
  v << a, b;
  return v;
}

// Prepared stream with hand-set latent vectors, sentence indices, times and
// content probabilities.
struct Row {
  int sent_index;
  DenseVector latent;
  Timestamp ts = 0;
  double scp = 0.5;
};

PreparedStream vector_stream(const std::vector<Row>& rows) {
  PreparedStream ps;
  ps.query_id = "q";
  int doc = 0;
  for (const auto& r : rows) {
    if (r.sent_index == 0) ++doc;
    ps.stream.sentences.push_back(sent("d" + std::to_string(doc), r.sent_index, r.ts, "w"));
    ps.latent.push_back(r.latent);
    ps.tfidf.emplace_back();
    std::array<double, feature::kStreamEnd> base{};
    base[feature::kContentProb] = r.scp;
    ps.base.push_back(base);
    ps.nuggets.emplace_back();
  }
  return ps;
}

std::vector<SentenceKey> keys(std::span<const Update> u) {
  std::vector<SentenceKey> out;
  for (const auto& x : u) out.push_back(x.key());
  return out;
}

Eigen::MatrixXd cosine_matrix(const std::vector<DenseVector>& pts) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) s(i, k) = cosine(pts[i], pts[k]);
  return s;
}

}  // namespace

// Cos

TEST(Cos, HandExample) {
  auto ps = vector_stream({{0, v2(1, 0)}, {1, v2(0, 1)}, {0, v2(1, 0.1)}, {0, v2(0, 1)}, {0, v2(1, 1)}});
  EXPECT_EQ(cos_positions(ps, {0.5}), (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(cos_positions(ps, {0.75}), (std::vector<std::size_t>{0, 3, 4}));
  EXPECT_THROW(cos_positions(ps, {1.5}), ValidationError);
}

TEST(Cos, IgnoresNonLeadSentences) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<Row> leads, mixed;
  for (int i = 0; i < 30; ++i) {
    Row r{0, v2(g(rng), g(rng))};
    leads.push_back(r);
    mixed.push_back(r);
    for (int k = 1; k < 3; ++k) mixed.push_back({k, v2(g(rng), g(rng))});
  }
  auto a = cos_run(vector_stream(leads), {0.6});
  auto b = cos_run(vector_stream(mixed), {0.6});
  EXPECT_EQ(keys(a), keys(b));
}

TEST(CosineFilter, ThresholdBoundaries) {
  std::vector<DenseVector> v{v2(1, 0), v2(1, 0), v2(0, 1), v2(1, 0.001)};
  EXPECT_EQ(cosine_filter(v, 1.0), (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(cosine_filter(v, 0.0), (std::vector<std::size_t>{0}));
  std::vector<DenseVector> none;
  EXPECT_TRUE(cosine_filter(none, 0.5).empty());
}

TEST(LsCos, KeepsAnOrderedSubsequence) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<Row> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({i % 3, v2(g(rng), g(rng))});
  auto ps = vector_stream(rows);
  std::vector<std::size_t> positions{1, 4, 5, 9, 13, 20, 21, 30, 39};
  for (double tau : {0.2, 0.5, 0.9, 1.0}) {
    auto kept = lscos_filter(ps, positions, tau);
    EXPECT_TRUE(std::includes(positions.begin(), positions.end(), kept.begin(), kept.end()));
    EXPECT_FALSE(kept.empty());
    EXPECT_EQ(kept.front(), 1u);
  }
}

TEST(LsCos, HandTrace) {
  auto ps = vector_stream({{0, v2(1, 0)}, {0, v2(1, 0.2)}, {0, v2(0, 1)}, {0, v2(0.1, 1)}});
  std::vector<std::size_t> positions{0, 1, 2, 3};
  EXPECT_EQ(lscos_filter(ps, positions, 0.9), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(lscos_filter(ps, positions, 1.0), positions);
}

TEST(FirstSentenceView, KeepsLeadSentences) {
  auto s = make_stream("q", {sent("a", 0, 1, "x"), sent("a", 1, 1, "y"), sent("b", 0, 2, "z"), sent("b", 2, 2, "w")});
  auto f = first_sentence_view(s);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f.sentences[1].doc_id, "b");
  EXPECT_TRUE(first_sentence_view(make_stream("q", {})).empty());
}

// Affinity propagation

TEST(AffinityPropagation, SinglePoint) {
  auto r = ap_cluster(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, -5.0), {});
  EXPECT_EQ(r.exemplars, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(r.converged);
}

TEST(AffinityPropagation, IdenticalPairYieldsOneExemplar) {
  auto r = ap_cluster(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Constant(2, 0.5), {});
  EXPECT_EQ(r.exemplars.size(), 1u);
  EXPECT_EQ(r.assignment[0], r.assignment[1]);
}

TEST(AffinityPropagation, MatchesBruteForceOnClusters) {
  std::vector<DenseVector> pts{v2(1, 0.05), v2(1, -0.05), v2(1, 0.1), v2(0.05, 1), v2(-0.05, 1), v2(0.1, 1)};
  auto s = cosine_matrix(pts);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(6, 0.5);
  auto r = ap_cluster(s, p, {});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.exemplars, oracles::ap_exemplars(s, p));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(r.assignment[i] < 3, i < 3);
}

TEST(AffinityPropagation, PreferenceLimits) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<DenseVector> pts;
  for (int i = 0; i < 7; ++i) pts.push_back(v2(g(rng), g(rng)));
  auto s = cosine_matrix(pts);
  auto high = ap_cluster(s, Eigen::VectorXd::Constant(7, 100.0), {});
  EXPECT_EQ(high.exemplars.size(), 7u);
  auto low = ap_cluster(s, Eigen::VectorXd::Constant(7, -100.0), {});
  EXPECT_EQ(low.exemplars.size(), 1u);
}

TEST(AffinityPropagation, InputValidation) {
  EXPECT_THROW(ap_cluster(Eigen::MatrixXd::Ones(2, 3), Eigen::VectorXd::Zero(2), {}), ValidationError);
  EXPECT_THROW(ap_cluster(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Zero(3), {}), ValidationError);
  ApConfig bad;
  bad.damping = 0.2;
  EXPECT_THROW(ap_cluster(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Zero(2), bad), ValidationError);
  EXPECT_TRUE(ap_cluster(Eigen::MatrixXd(0, 0), Eigen::VectorXd(0), {}).exemplars.empty());
}

TEST(AffinityPropagation, Deterministic) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<DenseVector> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(v2(g(rng), g(rng)));
  auto s = cosine_matrix(pts);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(8, 0.0);
  EXPECT_EQ(ap_cluster(s, p, {}).exemplars, ap_cluster(s, p, {}).exemplars);
}

// APSal

TEST(Apsal, OneSentenceWindow) {
  auto ps = vector_stream({{0, v2(1, 0), 100}});
  ApConfig c;
  c.window_secs = 3600;
  auto u = apsal_run(ps, 0, c);
  ASSERT_EQ(u.size(), 1u);
  EXPECT_EQ(u[0].time, 3600);
}

TEST(Apsal, CrossWindowSuppression) {
  ApConfig c;
  c.window_secs = 100;
  c.threshold = 0.5;
  auto ps = vector_stream({{0, v2(1, 0), 10}, {0, v2(1, 0.1), 150}, {0, v2(0, 1), 250}});
  auto u = apsal_positions(ps, 0, c);
  ASSERT_EQ(u.size(), 2u);
  EXPECT_EQ(u[0].position, 0u);
  EXPECT_EQ(u[0].window_end, 100);
  EXPECT_EQ(u[1].position, 2u);
  EXPECT_EQ(u[1].window_end, 300);
}

TEST(Apsal, TwoWindowTrace) {
  // Window 0 holds two clusters, window 1 one cluster near the first.
  ApConfig c;
  c.window_secs = 1000;
  c.threshold = 0.9;
  c.preference_offset = -0.5;
  auto ps = vector_stream({{0, v2(1, 0.02), 10, 1.0},
                           {0, v2(1, -0.02), 20, 0.2},
                           {0, v2(0.02, 1), 30, 1.0},
                           {0, v2(-0.02, 1), 40, 0.2},
                           {0, v2(1, 0.7), 1500, 1.0},
                           {0, v2(1, 0.65), 1600, 0.2}});
  auto u = apsal_positions(ps, 0, c);
  std::vector<std::size_t> pos;
  for (const auto& x : u) pos.push_back(x.position);
  EXPECT_EQ(pos, (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_EQ(u.back().window_end, 2000);
}

// Online runner

class Runner : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new SyntheticDataset(generate_synthetic(fixtures::small_synthetic(3, 40, 13)));
    LolsConfig c;
    c.passes = 2;
    c.samples_per_event = 1;
    std::vector<EventData> train(data_->events.begin(), data_->events.begin() + 2);
    bundle_ = new SystemBundle(bundle_from(train_system(train, {}, data_->corpora, fixtures::small_features(), c)));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete bundle_;
  }

  static std::vector<Update> batch(const EventData& ev, const RunOptions& o) {
    const auto& res = bundle_->resources;
    auto stream = o.first_sentences_only ? first_sentence_view(ev.stream) : ev.stream;
    auto ps = prepare_stream(stream, ev.query, res, &ev.judgments, ev.nuggets);
    switch (o.system) {
      case SystemKind::Ls: return run_learned(ps, bundle_->policy, &res.scaler);
      case SystemKind::LsCos: {
        LearnedPolicy learned(bundle_->policy, &res.scaler);
        auto s = run_policy(ps, learned);
        return updates_at(ps, lscos_filter(ps, s.updates, o.cos.tau));
      }
      case SystemKind::Cos: return cos_run(ps, o.cos);
      case SystemKind::ApSal: return apsal_run(ps, ev.query.start, o.ap);
      case SystemKind::Oracle: {
        OraclePolicy oracle;
        return updates_of(ps, run_policy(ps, oracle));
      }
    }
    return {};
  }

  static SyntheticDataset* data_;
  static SystemBundle* bundle_;
};

SyntheticDataset* Runner::data_ = nullptr;
SystemBundle* Runner::bundle_ = nullptr;

TEST_F(Runner, MatchesBatchComputation) {
  for (auto kind : {SystemKind::Ls, SystemKind::LsCos, SystemKind::Cos, SystemKind::ApSal, SystemKind::Oracle}) {
    for (bool first_only : {false, true}) {
      RunOptions o;
      o.system = kind;
      o.cos.tau = 0.6;
      o.first_sentences_only = first_only;
      for (const auto& ev : data_->events) {
        auto online = run_system(ev.stream, ev.query, *bundle_, o, &ev.judgments, ev.nuggets);
        auto expected = batch(ev, o);
        ASSERT_EQ(keys(online), keys(expected)) << parse_system_name(kind) << " " << ev.query.id;
        for (std::size_t i = 0; i < online.size(); ++i) EXPECT_EQ(online[i].time, expected[i].time);
      }
    }
  }
}

TEST_F(Runner, TruncatedStreamsGivePrefixes) {
  const auto& ev = data_->events[2];
  for (auto kind : {SystemKind::Ls, SystemKind::LsCos, SystemKind::Cos, SystemKind::Oracle}) {
    RunOptions o;
    o.system = kind;
    auto full = run_system(ev.stream, ev.query, *bundle_, o, &ev.judgments, ev.nuggets);
    for (std::size_t t = 0; t <= ev.stream.size(); t += 7) {
      auto part = run_system(ev.stream.prefix(t), ev.query, *bundle_, o, &ev.judgments, ev.nuggets);
      ASSERT_LE(part.size(), full.size());
      EXPECT_EQ(keys(part), keys(std::span<const Update>(full).first(part.size()))) << t;
    }
  }
}

TEST_F(Runner, UpdatesAreEmittedOnArrival) {
  const auto& ev = data_->events[0];
  RunOptions o;
  o.system = SystemKind::Oracle;
  std::vector<SentenceKey> seen;
  OnlineRunner r(ev.query, *bundle_, ev.stream.documents, o, [&](const Update& u) { seen.push_back(u.key()); },
                 &ev.judgments, ev.nuggets);
  for (const auto& s : ev.stream.sentences) {
    const auto before = seen.size();
    r.push(s);
    ASSERT_LE(seen.size(), before + 1);
    if (seen.size() > before) EXPECT_EQ(seen.back(), s.key());
  }
  r.finish();
  EXPECT_FALSE(seen.empty());
  EXPECT_EQ(seen.size(), r.emitted().size());
  EXPECT_THROW(r.push(ev.stream.sentences[0]), ValidationError);
}

TEST_F(Runner, OracleNeedsJudgments) {
  RunOptions o;
  o.system = SystemKind::Oracle;
  const auto& ev = data_->events[0];
  EXPECT_THROW(OnlineRunner(ev.query, *bundle_, ev.stream.documents, o, {}), ValidationError);
  EXPECT_THROW(parse_system("magic"), ValidationError);
  EXPECT_EQ(parse_system("apsal"), SystemKind::ApSal);
}

TEST(GridSearch, EarliestBestWins) {
  EXPECT_EQ(grid_argmax(std::vector<double>{0.1, 0.3, 0.3}), 1u);
  EXPECT_THROW(grid_argmax(std::vector<double>{}), ValidationError);
  auto g = grid_search<CosConfig>(cos_grid(default_tau_grid()), [](const CosConfig& c) { return -std::abs(c.tau - 0.6); });
  EXPECT_DOUBLE_EQ(g.best_config().tau, 0.6);
}
