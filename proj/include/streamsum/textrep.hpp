#ifndef STREAMSUM_TEXTREP_HPP
#define STREAMSUM_TEXTREP_HPP

// Shared text representations: tf-idf vectors, latent (LSA) vectors,
// cosine similarity and additive-smoothed unigram language models.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include "streamsum/error.hpp"

namespace streamsum {

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string> lowercase_all(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lowercase(t));
  return out;
}

using StopwordSet = std::unordered_set<std::string>;

inline const std::shared_ptr<const StopwordSet>& default_stopwords() {
  static const auto words = std::make_shared<const StopwordSet>(StopwordSet{
      "a",       "about",  "above", "after",  "again",  "against", "all",   "am",
      "an",      "and",    "any",   "are",    "as",     "at",      "be",    "because",
      "been",    "before", "being", "below",  "between", "both",   "but",   "by",
      "can",     "could",  "did",   "do",     "does",   "doing",   "down",  "during",
      "each",    "few",    "for",   "from",   "further", "had",    "has",   "have",
      "having",  "he",     "her",   "here",   "hers",   "herself", "him",   "himself",
      "his",     "how",    "i",     "if",     "in",     "into",    "is",    "it",
      "its",     "itself", "just",  "me",     "more",   "most",    "my",    "myself",
      "no",      "nor",    "not",   "now",    "of",     "off",     "on",    "once",
      "only",    "or",     "other", "our",    "ours",   "out",     "over",  "own",
      "said",    "same",   "she",   "should", "so",     "some",    "such",  "than",
      "that",    "the",    "their", "theirs", "them",   "then",    "there", "these",
      "they",    "this",   "those", "through", "to",    "too",     "under", "until",
      "up",      "very",   "was",   "we",     "were",   "what",    "when",  "where",
      "which",   "while",  "who",   "whom",   "why",    "will",    "with",  "would",
      "you",     "your",   "yours", ".",      ",",      ";",       ":",     "'s",
      "\"",      "'",      "(",     ")",      "-",      "--",      "!",     "?",
      "``",      "''"});
  return words;
}

inline const std::shared_ptr<const StopwordSet>& no_stopwords() {
  static const auto words = std::make_shared<const StopwordSet>();
  return words;
}

// ---------------------------------------------------------------------------
// Vectors and cosine

/// Sparse vector with strictly increasing indices.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const { return entries.empty(); }

  double dot(const SparseVector& other) const {
    double s = 0.0;
    auto a = entries.begin();
    auto b = other.entries.begin();
    while (a != entries.end() && b != other.entries.end()) {
      if (a->first < b->first) {
        ++a;
      } else if (b->first < a->first) {
        ++b;
      } else {
        s += a->second * b->second;
        ++a;
        ++b;
      }
    }
    return s;
  }

  double norm() const {
    double s = 0.0;
    for (const auto& [i, v] : entries) s += v * v;
    return std::sqrt(s);
  }

  SparseVector scaled(double c) const {
    SparseVector out = *this;
    for (auto& e : out.entries) e.second *= c;
    return out;
  }
};

using DenseVector = Eigen::VectorXd;

/// Cosine similarity in [-1, 1]; 0 when either side is all-zero.
inline double cosine(const SparseVector& a, const SparseVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

inline double cosine(const DenseVector& a, const DenseVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

/// Cosine distance convention: 1 - similarity.
template <class Vec>
double cosine_distance(const Vec& a, const Vec& b) {
  return 1.0 - cosine(a, b);
}

// ---------------------------------------------------------------------------
// tf-idf

/// tf-idf bag-of-words vectorizer; idf(t) = ln(N / df(t)) + 1.
class Vectorizer {
 public:
  Vectorizer() = default;

  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  std::size_t vocabulary_size() const { return terms_.size(); }
  const StopwordSet& stopwords() const { return *stopwords_; }
  const std::shared_ptr<const StopwordSet>& stopwords_ptr() const { return stopwords_; }
  std::size_t num_documents() const { return num_documents_; }

  std::optional<std::uint32_t> index_of(const std::string& term) const {
    auto it = index_.find(term);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Raw term counts times idf, L2-normalized. Out-of-vocabulary terms and
  /// stopwords are dropped; an empty result is the zero vector.
  SparseVector transform(std::span<const std::string> tokens) const {
    std::map<std::uint32_t, double> counts;
    for (const auto& raw : tokens) {
      const std::string tok = lowercase(raw);
      if (stopwords_->count(tok)) continue;
      auto it = index_.find(tok);
      if (it == index_.end()) continue;
      counts[it->second] += 1.0;
    }
    SparseVector v;
    v.entries.reserve(counts.size());
    double norm2 = 0.0;
    for (const auto& [i, c] : counts) {
      const double w = c * idf_[i];
      v.entries.emplace_back(i, w);
      norm2 += w * w;
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& e : v.entries) e.second *= inv;
    }
    return v;
  }

  /// Rebuild from persisted state.
  static Vectorizer from_parts(std::vector<std::string> terms, std::vector<double> idf,
                               std::shared_ptr<const StopwordSet> stopwords,
                               std::size_t num_documents) {
    if (terms.size() != idf.size()) throw ValidationError("vectorizer: terms/idf length mismatch");
    Vectorizer v;
    v.terms_ = std::move(terms);
    v.idf_ = std::move(idf);
    v.stopwords_ = std::move(stopwords);
    v.num_documents_ = num_documents;
    for (std::uint32_t i = 0; i < v.terms_.size(); ++i) {
      if (!std::isfinite(v.idf_[i]) || v.idf_[i] < 0.0)
        throw ValidationError("vectorizer: non-finite or negative idf for '" + v.terms_[i] + "'");
      if (!v.index_.emplace(v.terms_[i], i).second)
        throw ValidationError("vectorizer: duplicate term '" + v.terms_[i] + "'");
    }
    return v;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::shared_ptr<const StopwordSet> stopwords_ = default_stopwords();
  std::size_t num_documents_ = 0;
};

/// Each element of `corpus` is one document (token list) for idf purposes.
inline Vectorizer fit_vectorizer(std::span<const std::vector<std::string>> corpus,
                                 std::shared_ptr<const StopwordSet> stopwords = default_stopwords()) {
  if (corpus.empty()) throw ValidationError("fit_vectorizer: empty corpus");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    std::unordered_set<std::string> seen;
    for (const auto& raw : doc) {
      std::string tok = lowercase(raw);
      if (stopwords->count(tok)) continue;
      if (seen.insert(tok).second) ++df[tok];
    }
  }
  std::vector<std::string> terms;
  std::vector<double> idf;
  const double n = static_cast<double>(corpus.size());
  for (const auto& [term, count] : df) {
    terms.push_back(term);
    idf.push_back(std::log(n / static_cast<double>(count)) + 1.0);
  }
  return Vectorizer::from_parts(std::move(terms), std::move(idf), std::move(stopwords), corpus.size());
}

// ---------------------------------------------------------------------------
// Latent projection

/// Rank-k projection of tf-idf vectors. Stands in for a weighted matrix
/// factorization; any V x k basis can be plugged in through from_matrix.
class LatentProjector {
 public:
  LatentProjector() = default;

  static LatentProjector from_matrix(Eigen::MatrixXd projection) {
    if (projection.cols() < 1) throw ValidationError("latent projector: k must be >= 1");
    if (!projection.allFinite()) throw ValidationError("latent projector: non-finite entries");
    LatentProjector p;
    p.projection_ = std::move(projection);
    return p;
  }

  int k() const { return static_cast<int>(projection_.cols()); }
  Eigen::Index input_dim() const { return projection_.rows(); }
  const Eigen::MatrixXd& matrix() const { return projection_; }

  DenseVector project(const SparseVector& x) const {
    DenseVector z = DenseVector::Zero(projection_.cols());
    for (const auto& [i, v] : x.entries) {
      if (static_cast<Eigen::Index>(i) < projection_.rows()) z += v * projection_.row(i).transpose();
    }
    return z;
  }

 private:
  Eigen::MatrixXd projection_;
};

namespace detail {

inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace detail

/// Truncated SVD of the (documents x terms) tf-idf matrix; the projector holds
/// the top-k right singular vectors. Small problems use a dense SVD, larger
/// ones a seeded randomized range finder with power iterations.
inline LatentProjector fit_latent(const Vectorizer& vectorizer,
                                  std::span<const std::vector<std::string>> corpus, int k,
                                  std::uint64_t seed = 0x5eed, int power_iterations = 4) {
  const auto n = static_cast<Eigen::Index>(corpus.size());
  const auto v = static_cast<Eigen::Index>(vectorizer.vocabulary_size());
  if (k < 1) throw ValidationError("fit_latent: k must be >= 1");
  if (k > std::min(n, v))
    throw ValidationError("fit_latent: k=" + std::to_string(k) + " exceeds min(V=" + std::to_string(v) +
                          ", corpus size=" + std::to_string(n) + ")");

  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index r = 0; r < n; ++r) {
    for (const auto& [i, x] : vectorizer.transform(corpus[static_cast<std::size_t>(r)]).entries)
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(i), x);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(n, v);
  a.setFromTriplets(triplets.begin(), triplets.end());

  const Eigen::Index full = std::min(n, v);
  const Eigen::Index sketch = std::min<Eigen::Index>(k + 10, full);
  Eigen::MatrixXd basis;
  if (sketch == full || full <= 400) {
    Eigen::MatrixXd dense(a);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinV);
    basis = svd.matrixV().leftCols(k);
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd omega(n, sketch);
    for (Eigen::Index j = 0; j < sketch; ++j)
      for (Eigen::Index i = 0; i < n; ++i) omega(i, j) = gauss(rng);
    Eigen::MatrixXd q = detail::orthonormal_basis(Eigen::MatrixXd(a.transpose() * omega));
    for (int it = 0; it < power_iterations; ++it) {
      Eigen::MatrixXd left = detail::orthonormal_basis(Eigen::MatrixXd(a * q));
      q = detail::orthonormal_basis(Eigen::MatrixXd(a.transpose() * left));
    }
    Eigen::MatrixXd c = a * q;  // n x sketch
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinV);
    basis = (q * svd.matrixV()).leftCols(k);
  }
  return LatentProjector::from_matrix(std::move(basis));
}

// ---------------------------------------------------------------------------
// Unigram language models

/// Additive-alpha smoothed unigram model with a single OOV bucket:
/// p(w) = (c(w) + alpha) / (C + alpha * (V + 1)).
class LanguageModel {
 public:
  enum class Domain { EventType, General, Stream };

  explicit LanguageModel(double alpha = 0.1, Domain domain = Domain::General,
                         std::shared_ptr<const StopwordSet> stopwords = default_stopwords())
      : alpha_(alpha), domain_(domain), stopwords_(std::move(stopwords)) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("language model: alpha must be > 0");
  }

  double alpha() const { return alpha_; }
  Domain domain() const { return domain_; }
  double total() const { return total_; }
  std::size_t vocabulary_size() const { return counts_.size(); }
  const std::unordered_map<std::string, double>& counts() const { return counts_; }
  const StopwordSet& stopwords() const { return *stopwords_; }
  const std::shared_ptr<const StopwordSet>& stopwords_ptr() const { return stopwords_; }

  bool is_stopword(const std::string& lowered) const { return stopwords_->count(lowered) > 0; }

  /// Adds non-stopword tokens (lowercased) to the counts.
  void add(std::span<const std::string> tokens) {
    for (const auto& raw : tokens) {
      std::string tok = lowercase(raw);
      if (is_stopword(tok)) continue;
      counts_[tok] += 1.0;
      total_ += 1.0;
    }
  }

  void add_count(const std::string& term, double count) {
    if (!(count >= 0.0)) throw ValidationError("language model: negative count for '" + term + "'");
    counts_[term] += count;
    total_ += count;
  }

  double denominator() const { return total_ + alpha_ * (static_cast<double>(counts_.size()) + 1.0); }

  double oov_prob() const { return alpha_ / denominator(); }

  /// Probability of an already-lowercased term.
  double prob(const std::string& lowered) const {
    auto it = counts_.find(lowered);
    if (it == counts_.end()) return oov_prob();
    return (it->second + alpha_) / denominator();
  }

 private:
  double alpha_;
  Domain domain_;
  std::shared_ptr<const StopwordSet> stopwords_;
  std::unordered_map<std::string, double> counts_;
  double total_ = 0.0;
};

struct LogProbResult {
  double value = 0.0;
  bool no_content = false;
};

/// Mean log probability over the sentence's non-stopword tokens.
inline LogProbResult avg_log_prob(const LanguageModel& lm, std::span<const std::string> tokens) {
  double sum = 0.0;
  std::size_t m = 0;
  for (const auto& raw : tokens) {
    const std::string tok = lowercase(raw);
    if (lm.is_stopword(tok)) continue;
    sum += std::log(lm.prob(tok));
    ++m;
  }
  if (m == 0) return {0.0, true};
  return {sum / static_cast<double>(m), false};
}

inline LanguageModel update_stream_lm(LanguageModel lm, std::span<const std::string> document_tokens) {
  if (lm.domain() != LanguageModel::Domain::Stream)
    throw ValidationError("update_stream_lm: language model is not a stream model");
  lm.add(document_tokens);
  return lm;
}

}  // namespace streamsum

#endif
