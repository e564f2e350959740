#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace streamsum;
using fixtures::sent;

namespace {

Eigen::MatrixXd random_similarity(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) s(i, j) = s(j, i) = u(rng) < 0.2 ? 0.0 : u(rng);
  }
  return s;
}

SparseVector sv(std::vector<std::pair<std::uint32_t, double>> e) { return SparseVector{std::move(e)}; }

}  // namespace

// LexRank

TEST(LexRank, SingleSentence) { EXPECT_EQ(lexrank_from_similarity(Eigen::MatrixXd::Ones(1, 1)), std::vector<double>{1.0}); }

TEST(LexRank, UniformGraphIsUniform) {
  auto p = lexrank_from_similarity(Eigen::MatrixXd::Constant(5, 5, 0.3));
  for (double x : p) EXPECT_NEAR(x, 0.2, 1e-9);
}

TEST(LexRank, MatchesDenseEigenvector) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 9;
    auto s = random_similarity(rng, n);
    auto p = lexrank_from_similarity(s);
    auto q = oracles::lexrank(s, 0.85);
    double total = 0;
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(p[i], q[i], 1e-6);
      EXPECT_GT(p[i], 0.0);
      total += p[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(LexRank, InvariantToSimilarityScale) {
  std::mt19937_64 rng(5);
  auto s = random_similarity(rng, 7);
  auto a = lexrank_from_similarity(s);
  auto b = lexrank_from_similarity(s * 3.5);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(LexRank, IsolatedNodesGetTeleportMass) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(3, 3);
  auto p = lexrank_from_similarity(s);
  for (double x : p) EXPECT_NEAR(x, 1.0 / 3, 1e-9);
}

TEST(LexRank, NonSquareIsRejected) { EXPECT_THROW(lexrank_from_similarity(Eigen::MatrixXd::Ones(2, 3)), ValidationError); }

// Centroid and novelty

TEST(Centroid, IdenticalVectorsScoreOne) {
  std::vector<SparseVector> v{sv({{0, 1}, {3, 2}}), sv({{0, 1}, {3, 2}})};
  for (double c : centroid_score<SparseVector>(v)) EXPECT_NEAR(c, 1.0, 1e-12);
}

TEST(Centroid, OrthogonalPair) {
  std::vector<DenseVector> v{DenseVector::Unit(2, 0), DenseVector::Unit(2, 1)};
  for (double c : centroid_score<DenseVector>(v)) EXPECT_NEAR(c, std::sqrt(0.5), 1e-12);
}

TEST(Centroid, ZeroVectorScoresZero) {
  std::vector<SparseVector> v{sv({}), sv({{1, 1}})};
  auto c = centroid_score<SparseVector>(v);
  EXPECT_EQ(c[0], 0.0);
  EXPECT_NEAR(c[1], 1.0, 1e-12);
}

TEST(Novelty, LoneVectorIsNovel) {
  std::vector<DenseVector> v{DenseVector::Unit(3, 0)};
  auto n = novelty<DenseVector>(v);
  EXPECT_EQ(n[0].mean, 1.0);
  EXPECT_EQ(n[0].geometric, 1.0);
}

TEST(Novelty, DuplicatesFloorAtEps) {
  std::vector<DenseVector> v{DenseVector::Unit(3, 0), DenseVector::Unit(3, 0)};
  auto n = novelty<DenseVector>(v, 1e-6);
  EXPECT_NEAR(n[0].mean, 0.0, 1e-12);
  EXPECT_NEAR(n[0].geometric, 1e-6, 1e-15);
}

TEST(Novelty, HandExample) {
  // a=(1,0) b=(0,1) c=(1,1): distances a-b 1, a-c 1-1/sqrt2
  std::vector<DenseVector> v{DenseVector::Unit(2, 0), DenseVector::Unit(2, 1), DenseVector::Ones(2)};
  auto n = novelty<DenseVector>(v);
  const double dac = 1 - std::sqrt(0.5);
  EXPECT_NEAR(n[0].mean, (1 + dac) / 2, 1e-12);
  EXPECT_NEAR(n[0].geometric, std::sqrt(dac), 1e-12);
  EXPECT_NEAR(n[2].mean, dac, 1e-12);
}

// SumBasic

TEST(SumBasic, HandExample) {
  auto doc = fixtures::words("storm storm rain the");
  auto dist = unigram_distribution(doc, *default_stopwords());
  EXPECT_NEAR(dist.at("storm"), 2.0 / 3, 1e-12);
  EXPECT_EQ(dist.count("the"), 0u);
  auto s = sumbasic(fixtures::words("Storm rain the"), dist, *default_stopwords());
  EXPECT_NEAR(s.sum, 1.0, 1e-12);
  EXPECT_NEAR(s.avg, 0.5, 1e-12);
  EXPECT_FALSE(s.no_content);
}

TEST(SumBasic, StopwordOnlySentence) {
  auto dist = unigram_distribution(fixtures::words("storm the"), *default_stopwords());
  auto s = sumbasic(fixtures::words("the of"), dist, *default_stopwords());
  EXPECT_TRUE(s.no_content);
  EXPECT_EQ(s.avg, 0.0);
}

// Content classifier

TEST(ContentClassifier, SeparableKeyword) {
  std::vector<LabeledSentence> data;
  const char* pos[] = {"two people killed today", "killed in the blast", "officials say five killed",
                       "a man was killed", "killed near the river", "police confirm killed"};
  const char* neg[] = {"sunny day at the river", "officials say the road is open", "a man walked home",
                       "police confirm parade route", "the blast of music", "today the market opened"};
  for (auto* p : pos) data.push_back({fixtures::words(p), true});
  for (auto* n : neg) data.push_back({fixtures::words(n), false});
  auto c = train_content_classifier(data, TreeConfig{8, 1});
  EXPECT_EQ(c.predict(fixtures::words("three killed overnight")), 1.0);
  EXPECT_EQ(c.predict(fixtures::words("quiet overnight")), 0.0);
  EXPECT_FALSE(c.single_class());
  EXPECT_EQ(c.nodes().front().ngram, "killed");
}

TEST(ContentClassifier, DeterministicAndCountsAreConsistent) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> w(0, 15), len(2, 8);
  std::vector<LabeledSentence> data;
  for (int i = 0; i < 200; ++i) {
    LabeledSentence s;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) s.tokens.push_back("w" + std::to_string(w(rng)));
    s.positive = std::find(s.tokens.begin(), s.tokens.end(), "w3") != s.tokens.end() || w(rng) < 2;
    data.push_back(s);
  }
  auto a = train_content_classifier(data);
  auto b = train_content_classifier(data);
  ASSERT_EQ(a.nodes().size(), b.nodes().size());
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  for (std::size_t i = 0; i < a.nodes().size(); ++i) EXPECT_EQ(a.nodes()[i].ngram, b.nodes()[i].ngram);
  EXPECT_LE(a.depth(), 8);

  // Route every sample and recount leaves.
  std::vector<int> pos(a.nodes().size(), 0), cnt(a.nodes().size(), 0);
  for (const auto& s : data) {
    const auto grams = sentence_ngrams(s.tokens);
    int at = 0;
    while (!a.nodes()[at].leaf()) at = grams.count(a.nodes()[at].ngram) ? a.nodes()[at].present : a.nodes()[at].absent;
    ++cnt[at];
    pos[at] += s.positive;
  }
  for (std::size_t i = 0; i < a.nodes().size(); ++i) {
    const auto& n = a.nodes()[i];
    if (!n.leaf()) continue;
    EXPECT_EQ(cnt[i], n.samples);
    EXPECT_EQ(pos[i], n.positives);
    EXPECT_GE(n.samples, 5);
    EXPECT_NEAR(n.probability, static_cast<double>(n.positives) / n.samples, 1e-12);
  }
}

TEST(ContentClassifier, SingleClassIsConstant) {
  std::vector<LabeledSentence> data{{fixtures::words("a b"), false}, {fixtures::words("c d"), false}};
  auto c = train_content_classifier(data);
  EXPECT_TRUE(c.single_class());
  EXPECT_EQ(c.predict(fixtures::words("a")), 0.0);
}

TEST(ContentClassifier, NgramsIncludeBigrams) {
  auto g = sentence_ngrams(fixtures::words("Storm Hits"));
  EXPECT_EQ(g, (std::set<std::string>{"storm", "hits", "storm hits"}));
}

// Document frequency

TEST(DocumentFrequency, HandExample) {
  DocumentFrequencyTracker tr;
  EXPECT_TRUE(tr.observe(sent("a", 0, 100, "x")).new_document);
  EXPECT_FALSE(tr.observe(sent("a", 1, 100, "x")).new_document);
  tr.observe(sent("b", 0, 200, "x"));
  auto o = tr.observe(sent("c", 0, 3700, "x"));
  EXPECT_TRUE(o.has_previous_hour);
  EXPECT_EQ(o.hour_of_day, 1);
  EXPECT_NEAR(o.change, (1.0 - 2.0) / 2.0, 1e-12);
  auto gap = tr.observe(sent("d", 0, 3 * 3600 + 5, "x"));
  EXPECT_NEAR(gap.change, 1.0, 1e-12);
}

TEST(DocumentFrequency, FirstHourHasNoPrevious) {
  DocumentFrequencyTracker tr;
  EXPECT_FALSE(tr.observe(sent("a", 0, 7200, "x")).has_previous_hour);
}

TEST(DocumentFrequency, ConstantRateGivesZeroScore) {
  std::vector<Sentence> ss;
  for (int h = 0; h < 72; ++h) ss.push_back(sent("d" + std::to_string(h), 0, h * 3600 + 10, "x"));
  std::vector<SentenceStream> streams{make_stream("q", ss)};
  auto st = fit_stream_stats(streams);
  for (int h = 0; h < 24; ++h) EXPECT_EQ(st.zscore(h, 0.0), 0.0);
}

TEST(DocumentFrequency, ZscoreFallbacks) {
  StreamStats st;
  EXPECT_EQ(st.zscore(4, 2.5), 2.5);
  st.count[4] = 3;
  st.mean[4] = 1.0;
  st.variance[4] = 4.0;
  EXPECT_NEAR(st.zscore(4, 5.0), 2.0, 1e-12);
}

// Conjunction and scaling

TEST(Conjoin, HandExample) {
  FeatureVector f{{2.0}, std::make_shared<const std::vector<std::string>>(std::vector<std::string>{"x"})};
  auto c = conjoin(f, 0.5, 3.0);
  EXPECT_EQ(c.values, (std::vector<double>{2.0, 1.0, 6.0, 3.0}));
  EXPECT_EQ(*c.names, (std::vector<std::string>{"x", "x*scp", "x*df", "x*scp*df"}));
  EXPECT_THROW(conjoin(f, 1.5, 0.0), ValidationError);
}

TEST(Conjoin, RegistryIsFourTimesBase) {
  EXPECT_EQ(feature_names().size(), 4 * base_feature_names().size());
  EXPECT_EQ(base_feature_names().size(), static_cast<std::size_t>(feature::kBaseCount));
  EXPECT_EQ(Featurizer::dimension(), feature_names().size());
  EXPECT_EQ(registry_hash(feature_names()), registry_hash(feature_names()));
  EXPECT_NE(registry_hash(feature_names()), registry_hash(base_feature_names()));
}

TEST(Scaler, StandardizesAndClips) {
  std::vector<std::vector<double>> rows{{1, 5}, {3, 5}, {5, 5}};
  auto s = FeatureScaler::fit(rows);
  std::vector<double> x{3, 5};
  s.apply(x);
  EXPECT_NEAR(x[0], 0.0, 1e-12);
  EXPECT_NEAR(x[1], 0.0, 1e-12);
  std::vector<double> far{1e6, 5};
  s.apply(far);
  EXPECT_NEAR(far[0], s.clip * s.gain, 1e-12);
  EXPECT_NEAR(s.gain, 1 / std::sqrt(2.0), 1e-12);
}

// Stream features

class StreamFeatures : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(21);
    for (int e = 0; e < 3; ++e)
      events.push_back(fixtures::toy_event(fixtures::random_matches(rng, 15, 4), 4, "e" + std::to_string(e)));
    res = fixtures::toy_resources(events);
  }
  std::vector<EventData> events;
  Resources res;
};

TEST_F(StreamFeatures, StaticHandValues) {
  const auto& ev = events[0];
  const auto& s = ev.stream.sentences[0];
  auto f = static_features(s, ev.stream.document_of(0), ev.query, res);
  EXPECT_EQ(f.at("const"), 1.0);
  EXPECT_EQ(f.at("length"), static_cast<double>(s.tokens.size()));
  EXPECT_EQ(f.at("position"), 0.0);
  EXPECT_EQ(f.at("query_match_count"), 1.0);
  EXPECT_NEAR(f.at("query_match_fraction"), 1.0 / s.tokens.size(), 1e-12);
  EXPECT_EQ(f.at("lexrank_tfidf"), 1.0);
  EXPECT_EQ(f.at("novelty_latent_mean"), 1.0);
}

TEST_F(StreamFeatures, EmptyHistory) {
  auto ps = prepare_stream(events[0].stream, events[0].query, res);
  auto d = dynamic_features(ps, 3, {});
  EXPECT_EQ(d.at("updates_empty"), 1.0);
  EXPECT_EQ(d.at("update_sim_tfidf_max"), 0.0);
  EXPECT_EQ(d.at("update_sim_zero"), 0.0);
}

TEST_F(StreamFeatures, IdenticalSentenceHasUnitSimilarity) {
  std::vector<Sentence> ss{sent("x1", 0, 1100, "alpha storm coast"), sent("x2", 0, 1200, "alpha storm coast")};
  auto stream = make_stream("e0", ss);
  auto ps = prepare_stream(stream, events[0].query, res);
  std::vector<std::size_t> upd{0};
  auto u = update_similarity(ps, 1, upd);
  EXPECT_NEAR(u.tfidf_max, 1.0, 1e-12);
  EXPECT_NEAR(u.tfidf_avg, 1.0, 1e-12);
  EXPECT_FALSE(u.empty);
}

TEST_F(StreamFeatures, DegenerateInputsStayFinite) {
  std::vector<Sentence> ss{sent("z1", 0, 1000, "the of and"), sent("z1", 1, 1000, "unseenword"),
                           sent("z2", 0, 5000, "alpha"), sent("z3", 0, 5000, "alpha alpha alpha"),
                           sent("z4", 0, 99000, "q")};
  auto stream = make_stream("e0", ss);
  auto ps = prepare_stream(stream, events[0].query, res);
  std::vector<std::size_t> upd;
  for (std::size_t t = 0; t < ps.size(); ++t) {
    EXPECT_TRUE(state_features(ps, t, upd).all_finite()) << t;
    EXPECT_TRUE(state_features(ps, t, upd, &res.scaler).all_finite()) << t;
    upd.push_back(t);
  }
}

TEST_F(StreamFeatures, PrefixEquivalence) {
  const auto& ev = events[1];
  auto full = prepare_stream(ev.stream, ev.query, res);
  for (std::size_t t = 1; t <= ev.stream.size(); t += 4) {
    auto pre = prepare_stream(ev.stream.prefix(t), ev.query, res);
    ASSERT_EQ(pre.size(), t);
    for (std::size_t i = 0; i < t; ++i) EXPECT_EQ(pre.base[i], full.base[i]);
  }
}

TEST_F(StreamFeatures, ResourcesRoundTrip) {
  auto back = resources_from_json(json::parse(resources_to_json(res).dump()));
  const auto& ev = events[2];
  auto a = prepare_stream(ev.stream, ev.query, res);
  auto b = prepare_stream(ev.stream, ev.query, back);
  ASSERT_EQ(a.size(), b.size());
  std::vector<std::size_t> upd{0, 2};
  for (std::size_t t = 3; t < a.size(); ++t) {
    auto fa = state_features(a, t, upd, &res.scaler);
    auto fb = state_features(b, t, upd, &back.scaler);
    for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_NEAR(fa.values[i], fb.values[i], 1e-9) << feature_names()[i];
  }
}

TEST_F(StreamFeatures, BundleRoundTripAndRegistryCheck) {
  SystemBundle b;
  b.resources = res;
  b.policy = PolicyModel::zeros(Featurizer::dimension(), registry_hash(feature_names()));
  b.policy.weights[1][3] = 0.25;
  auto j = bundle_to_json(b);
  auto back = bundle_from_json(json::parse(j.dump()));
  EXPECT_EQ(back.policy.weights[1][3], 0.25);
  j["policy"]["registry"] = "deadbeef";
  EXPECT_THROW(bundle_from_json(j), ValidationError);
}
