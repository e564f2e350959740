#ifndef STREAMSUM_FEATURES_HPP
#define STREAMSUM_FEATURES_HPP

// State features: per-sentence static features computed against the
// sentence's document, stream-dependent dynamic features, and their
// conjunctions with the summary content probability and document frequency.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "streamsum/corpus.hpp"
#include "streamsum/error.hpp"
#include "streamsum/io.hpp"
#include "streamsum/textrep.hpp"

namespace streamsum {

// ---------------------------------------------------------------------------
// Single-document summarization scores

/// Continuous LexRank over a similarity matrix. Self-similarity is ignored,
/// weights below `threshold` (and non-positive weights) are dropped, and rows
/// without edges jump uniformly. Returns the stationary distribution of
/// p = (1 - d) / n + d * M^T p.
inline std::vector<double> lexrank_from_similarity(const Eigen::MatrixXd& sim, double threshold = 0.0,
                                                   double damping = 0.85, double tol = 1e-8,
                                                   int max_iterations = 1000) {
  const Eigen::Index n = sim.rows();
  if (n < 1 || sim.cols() != n) throw ValidationError("lexrank: need a non-empty square similarity matrix");
  if (n == 1) return {1.0};
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = sim(i, j);
      if (w > 0.0 && w >= threshold) {
        m(i, j) = w;
        row += w;
      }
    }
    if (row > 0.0)
      m.row(i) /= row;
    else
      m.row(i).setConstant(1.0 / static_cast<double>(n));
  }
  const Eigen::MatrixXd mt = m.transpose();
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const double teleport = (1.0 - damping) / static_cast<double>(n);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd next = (damping * (mt * p)).array() + teleport;
    next /= next.sum();
    const double delta = (next - p).lpNorm<1>();
    p = std::move(next);
    if (delta < tol) break;
  }
  return {p.data(), p.data() + n};
}

template <class Vec>
Eigen::MatrixXd similarity_matrix(std::span<const Vec> vectors) {
  const auto n = static_cast<Eigen::Index>(vectors.size());
  Eigen::MatrixXd sim(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sim(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c = cosine(vectors[static_cast<std::size_t>(i)], vectors[static_cast<std::size_t>(j)]);
      sim(i, j) = c;
      sim(j, i) = c;
    }
  }
  return sim;
}

template <class Vec>
std::vector<double> lexrank(std::span<const Vec> vectors, double threshold = 0.0, double damping = 0.85) {
  if (vectors.empty()) throw ValidationError("lexrank: no vectors");
  return lexrank_from_similarity(similarity_matrix(vectors), threshold, damping);
}

inline DenseVector centroid_of(std::span<const DenseVector> vectors) {
  DenseVector c = DenseVector::Zero(vectors.front().size());
  for (const auto& v : vectors) c += v;
  return c / static_cast<double>(vectors.size());
}

inline SparseVector centroid_of(std::span<const SparseVector> vectors) {
  std::map<std::uint32_t, double> acc;
  for (const auto& v : vectors)
    for (const auto& [i, x] : v.entries) acc[i] += x;
  SparseVector c;
  const double inv = 1.0 / static_cast<double>(vectors.size());
  for (const auto& [i, x] : acc)
    if (x != 0.0) c.entries.emplace_back(i, x * inv);
  return c;
}

/// score_i = cosine(v_i, mean of all vectors).
template <class Vec>
std::vector<double> centroid_score(std::span<const Vec> vectors) {
  if (vectors.empty()) throw ValidationError("centroid_score: no vectors");
  const Vec c = centroid_of(vectors);
  std::vector<double> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(cosine(v, c));
  return out;
}

struct Novelty {
  double mean = 1.0;
  double geometric = 1.0;
};

/// Arithmetic and geometric mean cosine distance of each vector to the others.
/// A lone vector has novelty 1; distances are floored at `eps` for the
/// geometric mean.
template <class Vec>
std::vector<Novelty> novelty(std::span<const Vec> vectors, double eps = 1e-6) {
  const std::size_t n = vectors.size();
  std::vector<Novelty> out(n);
  if (n < 2) return out;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0, log_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = cosine_distance(vectors[i], vectors[j]);
      sum += d;
      log_sum += std::log(std::max(d, eps));
    }
    const double m = static_cast<double>(n - 1);
    out[i] = {sum / m, std::exp(log_sum / m)};
  }
  return out;
}

struct SumBasicScore {
  double avg = 0.0;
  double sum = 0.0;
  bool no_content = false;
};

/// Unigram distribution over the non-stopword tokens of a document.
inline std::unordered_map<std::string, double> unigram_distribution(std::span<const std::string> tokens,
                                                                    const StopwordSet& stopwords) {
  std::unordered_map<std::string, double> dist;
  double total = 0.0;
  for (const auto& raw : tokens) {
    auto tok = lowercase(raw);
    if (stopwords.count(tok)) continue;
    dist[tok] += 1.0;
    total += 1.0;
  }
  for (auto& [w, c] : dist) c /= total;
  return dist;
}

inline SumBasicScore sumbasic(std::span<const std::string> sentence,
                              const std::unordered_map<std::string, double>& doc_dist,
                              const StopwordSet& stopwords) {
  SumBasicScore s;
  std::size_t m = 0;
  for (const auto& raw : sentence) {
    auto tok = lowercase(raw);
    if (stopwords.count(tok)) continue;
    auto it = doc_dist.find(tok);
    s.sum += it == doc_dist.end() ? 0.0 : it->second;
    ++m;
  }
  if (m == 0) return {0.0, 0.0, true};
  s.avg = s.sum / static_cast<double>(m);
  return s;
}

// ---------------------------------------------------------------------------
// Summary content probability

/// Lowercased unigrams and bigrams ("w1 w2") present in the sentence.
inline std::set<std::string> sentence_ngrams(std::span<const std::string> tokens) {
  std::set<std::string> out;
  std::string prev;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string tok = lowercase(tokens[i]);
    if (i > 0) out.insert(prev + " " + tok);
    out.insert(tok);
    prev = std::move(tok);
  }
  return out;
}

struct TreeConfig {
  int max_depth = 8;
  int min_leaf = 5;
};

struct LabeledSentence {
  std::vector<std::string> tokens;
  bool positive = false;
};

/// Decision tree over n-gram presence; leaves hold the positive fraction of
/// their training samples.
class ContentClassifier {
 public:
  struct Node {
    std::string ngram;  // empty at leaves
    int absent = -1;
    int present = -1;
    double probability = 0.0;
    int positives = 0;
    int samples = 0;

    bool leaf() const { return ngram.empty(); }
  };

  ContentClassifier() { nodes_.push_back(Node{}); }

  static ContentClassifier from_nodes(std::vector<Node> nodes, TreeConfig config, std::string fingerprint) {
    if (nodes.empty()) throw ValidationError("content classifier: no nodes");
    const int n = static_cast<int>(nodes.size());
    for (const auto& node : nodes) {
      if (node.probability < 0.0 || node.probability > 1.0)
        throw ValidationError("content classifier: leaf probability outside [0,1]");
      if (!node.leaf() && (node.absent <= 0 || node.absent >= n || node.present <= 0 || node.present >= n))
        throw ValidationError("content classifier: dangling child index");
    }
    ContentClassifier c;
    c.nodes_ = std::move(nodes);
    c.config_ = config;
    c.fingerprint_ = std::move(fingerprint);
    return c;
  }

  double predict(std::span<const std::string> tokens) const { return predict_ngrams(sentence_ngrams(tokens)); }

  double predict_ngrams(const std::set<std::string>& ngrams) const {
    int at = 0;
    while (!nodes_[static_cast<std::size_t>(at)].leaf()) {
      const auto& node = nodes_[static_cast<std::size_t>(at)];
      at = ngrams.count(node.ngram) ? node.present : node.absent;
    }
    return nodes_[static_cast<std::size_t>(at)].probability;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const TreeConfig& config() const { return config_; }
  const std::string& fingerprint() const { return fingerprint_; }
  bool single_class() const { return single_class_; }

  int depth() const {
    std::function<int(int)> rec = [&](int i) -> int {
      const auto& node = nodes_[static_cast<std::size_t>(i)];
      return node.leaf() ? 0 : 1 + std::max(rec(node.absent), rec(node.present));
    };
    return rec(0);
  }

  friend ContentClassifier train_content_classifier(std::span<const LabeledSentence>, TreeConfig);

 private:
  std::vector<Node> nodes_;
  TreeConfig config_;
  std::string fingerprint_;
  bool single_class_ = false;
};

inline std::string training_fingerprint(std::span<const LabeledSentence> data) {
  std::uint64_t h = fnv1a("content-classifier");
  for (const auto& s : data) {
    for (const auto& t : s.tokens) {
      h = fnv1a(t, h);
      h = fnv1a(" ", h);
    }
    h = fnv1a(s.positive ? "+\n" : "-\n", h);
  }
  return hex64(h);
}

/// Greedy Gini splits. Candidate n-grams are scanned in lexicographic order
/// and the first best split wins, so training is deterministic. Single-class
/// data yields a constant classifier with single_class() set.
inline ContentClassifier train_content_classifier(std::span<const LabeledSentence> data, TreeConfig config = {}) {
  if (data.empty()) throw ValidationError("train_content_classifier: no training sentences");
  if (config.max_depth < 0 || config.min_leaf < 1) throw ValidationError("train_content_classifier: bad tree config");

  std::map<std::string, int> vocab;
  std::vector<std::vector<int>> sample_features(data.size());
  {
    std::vector<std::set<std::string>> grams(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      grams[i] = sentence_ngrams(data[i].tokens);
      for (const auto& g : grams[i]) vocab.emplace(g, 0);
    }
    int next = 0;
    for (auto& [g, id] : vocab) id = next++;
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (const auto& g : grams[i]) sample_features[i].push_back(vocab.at(g));
    }
  }
  std::vector<std::string> names(vocab.size());
  for (const auto& [g, id] : vocab) names[static_cast<std::size_t>(id)] = g;

  ContentClassifier tree;
  tree.nodes_.clear();
  tree.config_ = config;
  tree.fingerprint_ = training_fingerprint(data);

  auto gini = [](double pos, double n) {
    if (n <= 0.0) return 0.0;
    const double p = pos / n;
    return 2.0 * p * (1.0 - p);
  };

  std::function<int(std::vector<std::size_t>, int)> grow = [&](std::vector<std::size_t> samples, int depth) -> int {
    const int id = static_cast<int>(tree.nodes_.size());
    tree.nodes_.push_back({});
    int pos = 0;
    for (auto s : samples) pos += data[s].positive ? 1 : 0;
    const int n = static_cast<int>(samples.size());
    {
      auto& node = tree.nodes_[static_cast<std::size_t>(id)];
      node.positives = pos;
      node.samples = n;
      node.probability = n > 0 ? static_cast<double>(pos) / n : 0.0;
    }
    if (depth >= config.max_depth || pos == 0 || pos == n || n < 2 * config.min_leaf) return id;

    std::unordered_map<int, std::pair<int, int>> counts;  // feature -> (present, present & positive)
    for (auto s : samples) {
      for (int f : sample_features[s]) {
        auto& c = counts[f];
        c.first += 1;
        c.second += data[s].positive ? 1 : 0;
      }
    }
    std::vector<int> candidates;
    candidates.reserve(counts.size());
    for (const auto& [f, c] : counts)
      if (c.first >= config.min_leaf && n - c.first >= config.min_leaf) candidates.push_back(f);
    std::sort(candidates.begin(), candidates.end());

    const double nn = static_cast<double>(n);
    const double parent = gini(pos, nn);
    double best = parent - 1e-12;
    int best_feature = -1;
    for (int f : candidates) {
      const auto [c, cp] = counts[f];
      const double score = (c / nn) * gini(cp, c) + ((nn - c) / nn) * gini(pos - cp, nn - c);
      if (score < best) {
        best = score;
        best_feature = f;
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> present, absent;
    for (auto s : samples) {
      const auto& fs = sample_features[s];
      (std::binary_search(fs.begin(), fs.end(), best_feature) ? present : absent).push_back(s);
    }
    const int absent_child = grow(std::move(absent), depth + 1);
    const int present_child = grow(std::move(present), depth + 1);
    auto& node = tree.nodes_[static_cast<std::size_t>(id)];
    node.ngram = names[static_cast<std::size_t>(best_feature)];
    node.absent = absent_child;
    node.present = present_child;
    return id;
  };

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  grow(std::move(all), 0);
  const auto& root = tree.nodes_.front();
  tree.single_class_ = root.positives == 0 || root.positives == root.samples;
  return tree;
}

// ---------------------------------------------------------------------------
// Document frequency

/// Hour-to-hour change in documents-per-hour seen at one stream position.
struct DfObservation {
  double change = 0.0;  // (df_h - df_{h-1}) / max(1, df_{h-1})
  bool has_previous_hour = false;
  int hour_of_day = 0;
  bool new_document = false;
};

inline std::int64_t hour_bucket(Timestamp t) {
  return t >= 0 ? t / 3600 : -((-t + 3599) / 3600);
}

/// Incremental documents-per-hour tracker. df_h counts the documents that
/// have arrived so far in the current hour; df_{h-1} is the (complete) count
/// for the previous hour.
class DocumentFrequencyTracker {
 public:
  DfObservation observe(const Sentence& s) {
    const std::int64_t h = hour_bucket(s.timestamp);
    if (!first_hour_) first_hour_ = h;
    DfObservation obs;
    if (seen_.insert(s.doc_id).second) {
      ++counts_[h];
      obs.new_document = true;
    }
    obs.hour_of_day = static_cast<int>(((h % 24) + 24) % 24);
    obs.has_previous_hour = h > *first_hour_;
    if (obs.has_previous_hour) {
      auto prev_it = counts_.find(h - 1);
      const double prev = prev_it == counts_.end() ? 0.0 : static_cast<double>(prev_it->second);
      const double cur = static_cast<double>(counts_[h]);
      obs.change = (cur - prev) / std::max(1.0, prev);
    }
    return obs;
  }

 private:
  std::optional<std::int64_t> first_hour_;
  std::unordered_set<std::string> seen_;
  std::unordered_map<std::int64_t, std::size_t> counts_;
};

/// Per hour-of-day mean and variance of the df change, from training streams.
struct StreamStats {
  std::array<double, 24> mean{};
  std::array<double, 24> variance{};
  std::array<std::size_t, 24> count{};

  /// Buckets without training data fall back to mean 0 / unit variance; a
  /// zero-variance bucket is only centered.
  double zscore(int hour_of_day, double value) const {
    const auto h = static_cast<std::size_t>(hour_of_day);
    if (count[h] == 0) return value;
    const double sd = std::sqrt(variance[h]);
    if (sd < 1e-9) return value - mean[h];
    return (value - mean[h]) / sd;
  }
};

/// One observation per document arrival that has a previous hour.
inline StreamStats fit_stream_stats(std::span<const SentenceStream> streams) {
  StreamStats st;
  std::array<double, 24> sum{}, sum2{};
  for (const auto& stream : streams) {
    DocumentFrequencyTracker tracker;
    for (const auto& s : stream.sentences) {
      auto obs = tracker.observe(s);
      if (!obs.new_document || !obs.has_previous_hour) continue;
      const auto h = static_cast<std::size_t>(obs.hour_of_day);
      sum[h] += obs.change;
      sum2[h] += obs.change * obs.change;
      ++st.count[h];
    }
  }
  for (std::size_t h = 0; h < 24; ++h) {
    if (st.count[h] == 0) continue;
    const double n = static_cast<double>(st.count[h]);
    st.mean[h] = sum[h] / n;
    st.variance[h] = std::max(0.0, sum2[h] / n - st.mean[h] * st.mean[h]);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Feature registry

namespace feature {
// Base feature layout. Indices are stable within a format version.
enum Index : int {
  kConst = 0,
  kLength,
  kPosition,
  kNeRatioPerson,
  kNeRatioLocation,
  kNeRatioOrganization,
  kQueryMatchCount,
  kQueryMatchFraction,
  kLmEvent,
  kLmGeneral,
  kSumBasicAvg,
  kSumBasicSum,
  kNoveltyTfidfMean,
  kNoveltyTfidfGeo,
  kNoveltyLatentMean,
  kNoveltyLatentGeo,
  kCentroidTfidf,
  kCentroidLatent,
  kLexRankTfidf,
  kLexRankLatent,
  kContentProb,
  kStaticEnd,
  kStreamLmSum = kStaticEnd,
  kStreamLmAvg,
  kStreamLmMax,
  kStreamLmNeSum,
  kStreamLmNeAvg,
  kStreamLmNeMax,
  kDfChange,
  kDfNoPrevHour,
  kStreamEnd,
  kUpdateSimTfidfAvg = kStreamEnd,
  kUpdateSimTfidfMax,
  kUpdateSimLatentAvg,
  kUpdateSimLatentMax,
  kUpdatesEmpty,
  kUpdateSimZero,
  kBaseCount
};
}  // namespace feature

inline const std::vector<std::string>& base_feature_names() {
  static const std::vector<std::string> names = {
      "const",
      "length",
      "position",
      "ne_ratio_person",
      "ne_ratio_location",
      "ne_ratio_organization",
      "query_match_count",
      "query_match_fraction",
      "lm_event_avg_logprob",
      "lm_general_avg_logprob",
      "sumbasic_avg",
      "sumbasic_sum",
      "novelty_tfidf_mean",
      "novelty_tfidf_gmean",
      "novelty_latent_mean",
      "novelty_latent_gmean",
      "centroid_tfidf",
      "centroid_latent",
      "lexrank_tfidf",
      "lexrank_latent",
      "content_prob",
      "stream_lm_sum",
      "stream_lm_avg",
      "stream_lm_max",
      "stream_lm_ne_sum",
      "stream_lm_ne_avg",
      "stream_lm_ne_max",
      "df_change_z",
      "df_no_prev_hour",
      "update_sim_tfidf_avg",
      "update_sim_tfidf_max",
      "update_sim_latent_avg",
      "update_sim_latent_max",
      "updates_empty",
      "update_sim_zero",
  };
  return names;
}

inline std::vector<std::string> conjoined_names(std::span<const std::string> base) {
  std::vector<std::string> out;
  out.reserve(base.size() * 4);
  for (const char* suffix : {"", "*scp", "*df", "*scp*df"})
    for (const auto& n : base) out.push_back(n + suffix);
  return out;
}

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = conjoined_names(base_feature_names());
  return names;
}

inline std::string registry_hash(std::span<const std::string> names) {
  std::uint64_t h = fnv1a("feature-registry-v1");
  for (const auto& n : names) {
    h = fnv1a(n, h);
    h = fnv1a("\n", h);
  }
  return hex64(h);
}

/// Dense feature values paired with their name registry.
struct FeatureVector {
  std::vector<double> values;
  std::shared_ptr<const std::vector<std::string>> names;

  std::size_t size() const { return values.size(); }

  double at(const std::string& name) const {
    for (std::size_t i = 0; i < names->size(); ++i)
      if ((*names)[i] == name) return values[i];
    throw ValidationError("no feature named '" + name + "'");
  }

  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

/// [f; f*scp; f*df; f*scp*df]
inline void conjoin_into(std::span<const double> f, double scp, double df, std::span<double> out) {
  const std::size_t n = f.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f[i];
    out[n + i] = f[i] * scp;
    out[2 * n + i] = f[i] * df;
    out[3 * n + i] = f[i] * scp * df;
  }
}

inline FeatureVector conjoin(const FeatureVector& f, double scp, double df) {
  if (!(scp >= 0.0 && scp <= 1.0)) throw ValidationError("conjoin: content probability outside [0,1]");
  if (!std::isfinite(df)) throw ValidationError("conjoin: non-finite document frequency");
  FeatureVector out;
  out.values.resize(f.size() * 4);
  conjoin_into(f.values, scp, df, out.values);
  out.names = std::make_shared<const std::vector<std::string>>(conjoined_names(*f.names));
  return out;
}

/// Standardizes feature columns, clips to +-clip, then multiplies by `gain`
/// (1/sqrt(d) after fit, so a typical row has unit norm). An empty scaler is
/// the identity.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> inv_sd;
  double clip = 10.0;
  double gain = 1.0;

  bool empty() const { return mean.empty(); }

  void apply(std::span<double> x) const {
    if (empty()) return;
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = gain * std::clamp((x[i] - mean[i]) * inv_sd[i], -clip, clip);
  }

  static FeatureScaler fit(std::span<const std::vector<double>> rows) {
    FeatureScaler s;
    if (rows.empty()) return s;
    const std::size_t d = rows.front().size();
    s.mean.assign(d, 0.0);
    s.inv_sd.assign(d, 1.0);
    std::vector<double> m2(d, 0.0);
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows)
      for (std::size_t i = 0; i < d; ++i) s.mean[i] += r[i];
    for (auto& m : s.mean) m /= n;
    for (const auto& r : rows)
      for (std::size_t i = 0; i < d; ++i) m2[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
    for (std::size_t i = 0; i < d; ++i) {
      const double sd = std::sqrt(m2[i] / n);
      s.inv_sd[i] = sd > 1e-9 ? 1.0 / sd : 1.0;
    }
    s.gain = 1.0 / std::sqrt(static_cast<double>(d));
    return s;
  }
};

// ---------------------------------------------------------------------------
// Resources and per-stream featurization

struct FeatureConfig {
  double lexrank_threshold = 0.0;
  double lexrank_damping = 0.85;
  double novelty_eps = 1e-6;
  double lm_alpha = 0.1;
  int latent_k = 100;
  TreeConfig tree;
};

/// Read-only models shared by every stream: text representations, language
/// models, the content classifier, df statistics and the feature scaler.
struct Resources {
  FeatureConfig config;
  Vectorizer vectorizer;
  LatentProjector projector;
  std::map<std::string, LanguageModel> event_lms;
  LanguageModel general_lm{0.1, LanguageModel::Domain::General};
  ContentClassifier classifier;
  StreamStats stream_stats;
  FeatureScaler scaler;

  const LanguageModel& event_lm(const std::string& event_type) const {
    static const LanguageModel empty{0.1, LanguageModel::Domain::EventType};
    auto it = event_lms.find(event_type);
    return it == event_lms.end() ? empty : it->second;
  }
};

/// Lowercased query words: keywords, synonyms and non-stopword query text.
inline std::unordered_set<std::string> query_terms(const Query& q, const StopwordSet& stopwords) {
  std::unordered_set<std::string> terms;
  auto add_words = [&](const std::string& phrase) {
    std::istringstream in(lowercase(phrase));
    std::string w;
    while (in >> w)
      if (!stopwords.count(w)) terms.insert(w);
  };
  for (const auto& k : q.keywords) add_words(k);
  for (const auto& s : q.synonyms) add_words(s);
  add_words(q.text);
  return terms;
}

/// Static (document-context) base features for every sentence of a document,
/// indexed like document.sentences.
inline std::vector<std::array<double, feature::kStaticEnd>> document_static_features(const Document& doc,
                                                                                  const Query& query,
                                                                                  const Resources& res) {
  using namespace feature;
  const std::size_t n = doc.sentences.size();
  std::vector<SparseVector> tfidf;
  std::vector<DenseVector> latent;
  tfidf.reserve(n);
  latent.reserve(n);
  for (const auto& s : doc.sentences) {
    tfidf.push_back(res.vectorizer.transform(s.tokens));
    latent.push_back(res.projector.project(tfidf.back()));
  }
  const auto& cfg = res.config;
  const auto nov_t = novelty<SparseVector>(tfidf, cfg.novelty_eps);
  const auto nov_l = novelty<DenseVector>(latent, cfg.novelty_eps);
  const auto cen_t = centroid_score<SparseVector>(tfidf);
  const auto cen_l = centroid_score<DenseVector>(latent);
  const auto lex_t = lexrank<SparseVector>(tfidf, cfg.lexrank_threshold, cfg.lexrank_damping);
  const auto lex_l = lexrank<DenseVector>(latent, cfg.lexrank_threshold, cfg.lexrank_damping);
  const auto& stop = res.vectorizer.stopwords();
  const auto doc_dist = unigram_distribution(doc.all_tokens(), stop);
  const auto qterms = query_terms(query, stop);
  const auto& event_lm = res.event_lm(query.event_type);

  std::vector<std::array<double, kStaticEnd>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = doc.sentences[i];
    auto& f = out[i];
    f[kConst] = 1.0;
    f[kLength] = static_cast<double>(s.tokens.size());
    f[kPosition] = static_cast<double>(s.sent_index);
    std::array<double, 4> tag_counts{};
    for (auto t : s.ne_tags) tag_counts[static_cast<std::size_t>(t)] += 1.0;
    const double non_ne = std::max(1.0, tag_counts[0]);
    f[kNeRatioPerson] = tag_counts[static_cast<std::size_t>(NeTag::Person)] / non_ne;
    f[kNeRatioLocation] = tag_counts[static_cast<std::size_t>(NeTag::Location)] / non_ne;
    f[kNeRatioOrganization] = tag_counts[static_cast<std::size_t>(NeTag::Organization)] / non_ne;
    double matches = 0.0;
    for (const auto& t : s.tokens)
      if (qterms.count(lowercase(t))) matches += 1.0;
    f[kQueryMatchCount] = matches;
    f[kQueryMatchFraction] = matches / static_cast<double>(s.tokens.size());
    f[kLmEvent] = avg_log_prob(event_lm, s.tokens).value;
    f[kLmGeneral] = avg_log_prob(res.general_lm, s.tokens).value;
    const auto sb = sumbasic(s.tokens, doc_dist, stop);
    f[kSumBasicAvg] = sb.avg;
    f[kSumBasicSum] = sb.sum;
    f[kNoveltyTfidfMean] = nov_t[i].mean;
    f[kNoveltyTfidfGeo] = nov_t[i].geometric;
    f[kNoveltyLatentMean] = nov_l[i].mean;
    f[kNoveltyLatentGeo] = nov_l[i].geometric;
    f[kCentroidTfidf] = cen_t[i];
    f[kCentroidLatent] = cen_l[i];
    f[kLexRankTfidf] = lex_t[i];
    f[kLexRankLatent] = lex_l[i];
    f[kContentProb] = res.classifier.predict(s.tokens);
  }
  return out;
}

/// Static base features of one sentence (named registry covers the static
/// slice only).
inline FeatureVector static_features(const Sentence& sentence, const Document& doc, const Query& query,
                                     const Resources& res) {
  const int pos = doc.position_of(sentence.sent_index);
  if (pos < 0) throw ValidationError("static_features: sentence not in its document");
  const auto all = document_static_features(doc, query, res);
  FeatureVector fv;
  fv.values.assign(all[static_cast<std::size_t>(pos)].begin(), all[static_cast<std::size_t>(pos)].end());
  const auto& names = base_feature_names();
  fv.names = std::make_shared<const std::vector<std::string>>(names.begin(), names.begin() + feature::kStaticEnd);
  return fv;
}

struct StreamLmFeatures {
  double sum = 0.0, avg = 0.0, max = 0.0;
  double ne_sum = 0.0, ne_avg = 0.0, ne_max = 0.0;
};

/// Token probabilities of the sentence's non-stopwords under the stream LM,
/// overall and restricted to PERSON/LOCATION/ORGANIZATION tokens.
inline StreamLmFeatures stream_lm_features(const LanguageModel& lm, const Sentence& s) {
  StreamLmFeatures f;
  std::size_t m = 0, ne = 0;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const auto tok = lowercase(s.tokens[i]);
    if (lm.is_stopword(tok)) continue;
    const double p = lm.prob(tok);
    f.sum += p;
    f.max = std::max(f.max, p);
    ++m;
    if (s.ne_tags[i] != NeTag::None) {
      f.ne_sum += p;
      f.ne_max = std::max(f.ne_max, p);
      ++ne;
    }
  }
  if (m > 0) f.avg = f.sum / static_cast<double>(m);
  if (ne > 0) f.ne_avg = f.ne_sum / static_cast<double>(ne);
  return f;
}

struct UpdateSimilarity {
  double tfidf_avg = 0.0, tfidf_max = 0.0;
  double latent_avg = 0.0, latent_max = 0.0;
  bool empty = true;
  bool zero = false;  // either maximum similarity is 0 (non-empty history only)
};

/// Per-position data that does not depend on decisions. Built incrementally:
/// position t only ever sees sentences 0..t and their (atomic) documents.
struct PreparedStream {
  std::string query_id;
  SentenceStream stream;
  std::vector<SparseVector> tfidf;
  std::vector<DenseVector> latent;
  std::vector<std::array<double, feature::kStreamEnd>> base;  // static + stream-LM + df
  // Nugget indices per position; empty when the stream is unjudged.
  std::vector<std::vector<int>> nuggets;
  std::size_t num_nuggets = 0;
  bool judged = false;

  std::size_t size() const { return base.size(); }
  double content_prob(std::size_t t) const { return base[t][feature::kContentProb]; }
  double df(std::size_t t) const { return base[t][feature::kDfChange]; }
};

/// Incremental builder for PreparedStream; one sentence at a time.
class StreamPreparer {
 public:
  StreamPreparer(const Query& query, const Resources& res, std::shared_ptr<const DocumentTable> documents)
      : query_(query),
        res_(res),
        documents_(std::move(documents)),
        stream_lm_(res.config.lm_alpha, LanguageModel::Domain::Stream, res.vectorizer.stopwords_ptr()) {
    out_.query_id = query.id;
    out_.stream.query_id = query.id;
    out_.stream.documents = documents_;
  }

  void set_judgments(const JudgmentSet& judgments, std::span<const Nugget> nuggets) {
    judgments_ = &judgments;
    nugget_index_.clear();
    for (std::size_t i = 0; i < nuggets.size(); ++i) nugget_index_[nuggets[i].id] = static_cast<int>(i);
    out_.num_nuggets = nuggets.size();
    out_.judged = true;
  }

  void push(const Sentence& s) {
    using namespace feature;
    auto doc_it = documents_->find(s.doc_id);
    if (doc_it == documents_->end()) throw ValidationError("no document '" + s.doc_id + "' for stream sentence");
    const Document& doc = doc_it->second;
    auto cache = static_cache_.find(s.doc_id);
    if (cache == static_cache_.end()) {
      stream_lm_.add(doc.all_tokens());
      cache = static_cache_.emplace(s.doc_id, document_static_features(doc, query_, res_)).first;
    }
    const int pos = doc.position_of(s.sent_index);
    if (pos < 0) throw ValidationError("sentence " + s.doc_id + "#" + std::to_string(s.sent_index) + " not in document");

    std::array<double, kStreamEnd> row{};
    const auto& st = cache->second[static_cast<std::size_t>(pos)];
    std::copy(st.begin(), st.end(), row.begin());
    const auto lmf = stream_lm_features(stream_lm_, s);
    row[kStreamLmSum] = lmf.sum;
    row[kStreamLmAvg] = lmf.avg;
    row[kStreamLmMax] = lmf.max;
    row[kStreamLmNeSum] = lmf.ne_sum;
    row[kStreamLmNeAvg] = lmf.ne_avg;
    row[kStreamLmNeMax] = lmf.ne_max;
    const auto obs = df_.observe(s);
    row[kDfChange] = obs.has_previous_hour ? res_.stream_stats.zscore(obs.hour_of_day, obs.change) : 0.0;
    row[kDfNoPrevHour] = obs.has_previous_hour ? 0.0 : 1.0;

    out_.base.push_back(row);
    out_.tfidf.push_back(res_.vectorizer.transform(s.tokens));
    out_.latent.push_back(res_.projector.project(out_.tfidf.back()));
    out_.stream.sentences.push_back(s);
    std::vector<int> ids;
    if (judgments_) {
      for (const auto& id : judgments_->nuggets_of(s.key())) {
        auto it = nugget_index_.find(id);
        if (it == nugget_index_.end()) throw ValidationError("judgment cites unknown nugget '" + id + "'");
        ids.push_back(it->second);
      }
    }
    out_.nuggets.push_back(std::move(ids));
  }

  const PreparedStream& prepared() const { return out_; }
  PreparedStream take() { return std::move(out_); }

 private:
  const Query& query_;
  const Resources& res_;
  std::shared_ptr<const DocumentTable> documents_;
  LanguageModel stream_lm_;
  DocumentFrequencyTracker df_;
  std::unordered_map<std::string, std::vector<std::array<double, feature::kStaticEnd>>> static_cache_;
  const JudgmentSet* judgments_ = nullptr;
  std::unordered_map<std::string, int> nugget_index_;
  PreparedStream out_;
};

inline PreparedStream prepare_stream(const SentenceStream& stream, const Query& query, const Resources& res,
                                     const JudgmentSet* judgments = nullptr, std::span<const Nugget> nuggets = {}) {
  StreamPreparer prep(query, res, stream.documents);
  if (judgments) prep.set_judgments(*judgments, nuggets);
  for (const auto& s : stream.sentences) prep.push(s);
  return prep.take();
}

/// Update-similarity features of position t against earlier selected
/// positions.
inline UpdateSimilarity update_similarity(const PreparedStream& ps, std::size_t t,
                                          std::span<const std::size_t> updates) {
  UpdateSimilarity u;
  if (updates.empty()) return u;
  u.empty = false;
  u.tfidf_max = -1.0;
  u.latent_max = -1.0;
  for (auto j : updates) {
    const double a = cosine(ps.tfidf[t], ps.tfidf[j]);
    const double b = cosine(ps.latent[t], ps.latent[j]);
    u.tfidf_avg += a;
    u.latent_avg += b;
    u.tfidf_max = std::max(u.tfidf_max, a);
    u.latent_max = std::max(u.latent_max, b);
  }
  const double n = static_cast<double>(updates.size());
  u.tfidf_avg /= n;
  u.latent_avg /= n;
  u.zero = u.tfidf_max == 0.0 || u.latent_max == 0.0;
  return u;
}

/// Base (unconjoined) features of state (t, updates).
inline void base_features_into(const PreparedStream& ps, std::size_t t, std::span<const std::size_t> updates,
                               std::span<double> out) {
  using namespace feature;
  const auto& row = ps.base[t];
  std::copy(row.begin(), row.end(), out.begin());
  const auto u = update_similarity(ps, t, updates);
  out[kUpdateSimTfidfAvg] = u.tfidf_avg;
  out[kUpdateSimTfidfMax] = u.tfidf_max;
  out[kUpdateSimLatentAvg] = u.latent_avg;
  out[kUpdateSimLatentMax] = u.latent_max;
  out[kUpdatesEmpty] = u.empty ? 1.0 : 0.0;
  out[kUpdateSimZero] = u.zero ? 1.0 : 0.0;
}

/// Assembles the full state feature vector Phi(s_t): base features,
/// conjunctions, then scaling.
class Featurizer {
 public:
  explicit Featurizer(const FeatureScaler* scaler = nullptr) : scaler_(scaler) {}

  static constexpr std::size_t dimension() { return 4 * feature::kBaseCount; }

  std::span<const double> operator()(const PreparedStream& ps, std::size_t t, std::span<const std::size_t> updates) {
    base_features_into(ps, t, updates, base_);
    conjoin_into(base_, ps.content_prob(t), ps.df(t), out_);
    if (scaler_) scaler_->apply(out_);
    return out_;
  }

  /// Unscaled conjoined features.
  std::span<const double> raw(const PreparedStream& ps, std::size_t t, std::span<const std::size_t> updates) {
    base_features_into(ps, t, updates, base_);
    conjoin_into(base_, ps.content_prob(t), ps.df(t), out_);
    return out_;
  }

 private:
  const FeatureScaler* scaler_;
  std::array<double, feature::kBaseCount> base_{};
  std::array<double, 4 * feature::kBaseCount> out_{};
};

/// Dynamic base features (stream LM, df and update similarity) for state
/// (t, updates) as a named vector.
inline FeatureVector dynamic_features(const PreparedStream& ps, std::size_t t, std::span<const std::size_t> updates) {
  std::array<double, feature::kBaseCount> all{};
  base_features_into(ps, t, updates, all);
  const auto& names = base_feature_names();
  FeatureVector fv;
  fv.values.assign(all.begin() + feature::kStaticEnd, all.end());
  fv.names = std::make_shared<const std::vector<std::string>>(names.begin() + feature::kStaticEnd, names.end());
  return fv;
}

/// Full named Phi(s_t).
inline FeatureVector state_features(const PreparedStream& ps, std::size_t t, std::span<const std::size_t> updates,
                                    const FeatureScaler* scaler = nullptr) {
  Featurizer fz(scaler);
  auto v = fz(ps, t, updates);
  static const auto names = std::make_shared<const std::vector<std::string>>(feature_names());
  return {{v.begin(), v.end()}, names};
}

}  // namespace streamsum

#endif
