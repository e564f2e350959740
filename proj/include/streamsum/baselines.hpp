#ifndef STREAMSUM_BASELINES_HPP
#define STREAMSUM_BASELINES_HPP

// Comparison systems: Cos (first-sentence cosine threshold), APSal (windowed
// affinity propagation with salience preferences) and the LsCos filter.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "streamsum/corpus.hpp"
#include "streamsum/error.hpp"
#include "streamsum/features.hpp"
#include "streamsum/io.hpp"
#include "streamsum/metrics.hpp"
#include "streamsum/textrep.hpp"

namespace streamsum {

inline SentenceStream first_sentence_view(const SentenceStream& stream) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < stream.sentences.size(); ++i)
    if (stream.sentences[i].sent_index == 0) keep.push_back(i);
  return stream.subsequence(keep);
}

/// Max cosine of v against the vectors at `kept`; -inf for an empty set.
inline double max_similarity(const DenseVector& v, std::span<const DenseVector> vectors,
                             std::span<const std::size_t> kept) {
  double best = -std::numeric_limits<double>::infinity();
  for (auto j : kept) best = std::max(best, cosine(v, vectors[j]));
  return best;
}

/// Greedy redundancy filter: keep candidate i iff its max cosine to the
/// previously kept candidates is strictly below tau. The first candidate is
/// always kept. Returns kept indices.
inline std::vector<std::size_t> cosine_filter(std::span<const DenseVector> vectors,
                                              std::span<const std::size_t> candidates, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("cosine threshold must lie in [0, 1]");
  std::vector<std::size_t> kept;
  for (auto i : candidates)
    if (max_similarity(vectors[i], vectors, kept) < tau) kept.push_back(i);
  return kept;
}

inline std::vector<std::size_t> cosine_filter(std::span<const DenseVector> vectors, double tau) {
  std::vector<std::size_t> all(vectors.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return cosine_filter(vectors, all, tau);
}

inline std::vector<Update> updates_at(const PreparedStream& ps, std::span<const std::size_t> positions) {
  std::vector<Update> out;
  out.reserve(positions.size());
  for (auto t : positions) out.push_back(make_update(ps.query_id, ps.stream.sentences[t]));
  return out;
}

// ---------------------------------------------------------------------------
// Cos

struct CosConfig {
  double tau = 0.5;

  void validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("cos: tau must lie in [0, 1]");
  }
};

/// Positions selected by Cos: first sentences only, latent cosine < tau.
inline std::vector<std::size_t> cos_positions(const PreparedStream& ps, const CosConfig& config) {
  config.validate();
  std::vector<std::size_t> firsts;
  for (std::size_t t = 0; t < ps.size(); ++t)
    if (ps.stream.sentences[t].sent_index == 0) firsts.push_back(t);
  return cosine_filter(ps.latent, firsts, config.tau);
}

inline std::vector<Update> cos_run(const PreparedStream& ps, const CosConfig& config) {
  return updates_at(ps, cos_positions(ps, config));
}

// ---------------------------------------------------------------------------
// LsCos

/// Keeps the learned policy's updates whose latent cosine to previously kept
/// updates is below tau; `positions` are the policy's selections in order.
inline std::vector<std::size_t> lscos_filter(const PreparedStream& ps, std::span<const std::size_t> positions,
                                             double tau) {
  return cosine_filter(ps.latent, positions, tau);
}

// ---------------------------------------------------------------------------
// Affinity propagation

struct ApConfig {
  double damping = 0.9;
  int max_iterations = 1000;
  int convergence_window = 50;
  double preference_offset = -0.5;
  double window_secs = 3600.0;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  double noise = 1e-12;  // relative jitter on S, breaks exact symmetries

  void validate() const {
    if (!(damping >= 0.5 && damping < 1.0)) throw ValidationError("ap: damping must lie in [0.5, 1)");
    if (max_iterations < 1) throw ValidationError("ap: max_iterations must be >= 1");
    if (convergence_window < 1) throw ValidationError("ap: convergence_window must be >= 1");
    if (!(window_secs > 0.0)) throw ValidationError("ap: window must be > 0");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("ap: threshold must lie in [0, 1]");
    if (!std::isfinite(preference_offset)) throw ValidationError("ap: preference offset must be finite");
    if (!(noise >= 0.0)) throw ValidationError("ap: noise must be >= 0");
  }
};

struct ApResult {
  std::vector<std::size_t> exemplars;   // ascending
  std::vector<std::size_t> assignment;  // exemplar of each point
  int iterations = 0;
  bool converged = false;
  bool fallback = false;  // no point passed r + a > 0; best single exemplar used
};

inline ApResult ap_cluster(const Eigen::MatrixXd& similarity, const Eigen::VectorXd& preferences,
                           const ApConfig& config) {
  config.validate();
  const Eigen::Index n = similarity.rows();
  if (similarity.cols() != n) throw ValidationError("ap_cluster: similarity matrix must be square");
  if (preferences.size() != n) throw ValidationError("ap_cluster: one preference per point");
  if (!similarity.allFinite() || !preferences.allFinite())
    throw ValidationError("ap_cluster: non-finite similarity or preference");
  ApResult res;
  if (n == 0) {
    res.converged = true;
    return res;
  }
  if (n == 1) {
    res.exemplars = {0};
    res.assignment = {0};
    res.converged = true;
    return res;
  }

  Eigen::MatrixXd S = similarity;
  S.diagonal() = preferences;
  if (config.noise > 0.0) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double tiny = std::numeric_limits<double>::min() * 100.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < n; ++k)
        S(i, k) += (config.noise * std::abs(S(i, k)) + tiny) * unit(rng);
  }

  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const double lambda = config.damping;
  std::vector<char> previous(static_cast<std::size_t>(n), 0);
  int stable = 0;

  for (int it = 1; it <= config.max_iterations; ++it) {
    // Responsibilities.
    for (Eigen::Index i = 0; i < n; ++i) {
      double first = -std::numeric_limits<double>::infinity(), second = first;
      Eigen::Index arg = -1;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double v = A(i, k) + S(i, k);
        if (v > first) {
          second = first;
          first = v;
          arg = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const double r = S(i, k) - (k == arg ? second : first);
        R(i, k) = lambda * R(i, k) + (1.0 - lambda) * r;
      }
    }
    // Availabilities.
    for (Eigen::Index k = 0; k < n; ++k) {
      double pos_sum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != k) pos_sum += std::max(0.0, R(i, k));
      for (Eigen::Index i = 0; i < n; ++i) {
        double a;
        if (i == k)
          a = pos_sum;
        else
          a = std::min(0.0, R(k, k) + pos_sum - std::max(0.0, R(i, k)));
        A(i, k) = lambda * A(i, k) + (1.0 - lambda) * a;
      }
    }
    if (!R.allFinite() || !A.allFinite()) throw ComputeError("ap_cluster: non-finite messages");

    std::vector<char> current(static_cast<std::size_t>(n), 0);
    bool any = false;
    for (Eigen::Index k = 0; k < n; ++k) {
      current[static_cast<std::size_t>(k)] = R(k, k) + A(k, k) > 0.0;
      any = any || current[static_cast<std::size_t>(k)];
    }
    stable = current == previous ? stable + 1 : 1;
    previous = std::move(current);
    res.iterations = it;
    if (stable >= config.convergence_window && any) {
      res.converged = true;
      break;
    }
  }

  for (Eigen::Index k = 0; k < n; ++k)
    if (previous[static_cast<std::size_t>(k)]) res.exemplars.push_back(static_cast<std::size_t>(k));
  if (res.exemplars.empty()) {
    Eigen::Index best = 0;
    (R + A).diagonal().maxCoeff(&best);
    res.exemplars.push_back(static_cast<std::size_t>(best));
    res.fallback = true;
  }
  res.assignment.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t best = res.exemplars.front();
    bool self = false;
    for (auto k : res.exemplars) {
      if (static_cast<Eigen::Index>(k) == i) {
        self = true;
        break;
      }
      if (similarity(i, static_cast<Eigen::Index>(k)) > similarity(i, static_cast<Eigen::Index>(best))) best = k;
    }
    res.assignment[static_cast<std::size_t>(i)] = self ? static_cast<std::size_t>(i) : best;
  }
  return res;
}

// ---------------------------------------------------------------------------
// APSal

struct ApsalUpdate {
  std::size_t position;
  Timestamp window_end;
};

inline std::uint64_t mix_window_seed(std::uint64_t seed, std::int64_t window) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(window), static_cast<std::uint32_t>(static_cast<std::uint64_t>(window) >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Windows are [origin + w * len, origin + (w + 1) * len). Each window is
/// clustered once it closes; its exemplars pass a cross-window cosine filter
/// and are stamped with the window end.
inline std::vector<ApsalUpdate> apsal_positions(const PreparedStream& ps, Timestamp origin, const ApConfig& config) {
  config.validate();
  std::vector<ApsalUpdate> out;
  std::vector<std::size_t> emitted;
  const auto window_of = [&](Timestamp ts) {
    return static_cast<std::int64_t>(std::floor(static_cast<double>(ts - origin) / config.window_secs));
  };
  std::size_t begin = 0;
  while (begin < ps.size()) {
    const auto w = window_of(ps.stream.sentences[begin].timestamp);
    std::size_t end = begin;
    while (end < ps.size() && window_of(ps.stream.sentences[end].timestamp) == w) ++end;
    const auto m = static_cast<Eigen::Index>(end - begin);
    Eigen::MatrixXd S(m, m);
    Eigen::VectorXd p(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      p(i) = ps.content_prob(begin + static_cast<std::size_t>(i)) + config.preference_offset;
      for (Eigen::Index k = 0; k < m; ++k)
        S(i, k) = cosine(ps.latent[begin + static_cast<std::size_t>(i)], ps.latent[begin + static_cast<std::size_t>(k)]);
    }
    ApConfig local = config;
    local.seed = mix_window_seed(config.seed, w);
    const auto ap = ap_cluster(S, p, local);
    const auto window_end =
        origin + static_cast<Timestamp>(std::llround(static_cast<double>(w + 1) * config.window_secs));
    for (auto e : ap.exemplars) {
      const std::size_t t = begin + e;
      if (max_similarity(ps.latent[t], ps.latent, emitted) < config.threshold) {
        emitted.push_back(t);
        out.push_back({t, window_end});
      }
    }
    begin = end;
  }
  return out;
}

inline std::vector<Update> apsal_run(const PreparedStream& ps, Timestamp origin, const ApConfig& config) {
  std::vector<Update> out;
  for (const auto& u : apsal_positions(ps, origin, config)) {
    auto up = make_update(ps.query_id, ps.stream.sentences[u.position]);
    up.time = u.window_end;
    out.push_back(std::move(up));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid search

/// Index of the best score; earliest wins ties.
inline std::size_t grid_argmax(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("grid search: empty grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

template <class Config>
struct GridResult {
  std::vector<Config> candidates;
  std::vector<double> scores;
  std::size_t best = 0;

  const Config& best_config() const { return candidates.at(best); }
};

template <class Config>
GridResult<Config> grid_search(std::vector<Config> candidates, const std::function<double(const Config&)>& score) {
  GridResult<Config> r;
  r.candidates = std::move(candidates);
  for (const auto& c : r.candidates) r.scores.push_back(score(c));
  r.best = grid_argmax(r.scores);
  return r;
}

inline std::vector<double> default_tau_grid() { return {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }
inline std::vector<double> default_window_grid() { return {1800.0, 3600.0, 3.0 * 3600.0, 6.0 * 3600.0}; }
inline std::vector<double> default_offset_grid() { return {-1.5, -1.0, -0.5, 0.0}; }

inline std::vector<CosConfig> cos_grid(std::span<const double> taus) {
  std::vector<CosConfig> out;
  for (double t : taus) out.push_back({t});
  return out;
}

inline std::vector<ApConfig> ap_grid(std::span<const double> windows, std::span<const double> taus,
                                     std::span<const double> offsets, const ApConfig& base = {}) {
  std::vector<ApConfig> out;
  for (double w : windows)
    for (double t : taus)
      for (double o : offsets) {
        ApConfig c = base;
        c.window_secs = w;
        c.threshold = t;
        c.preference_offset = o;
        out.push_back(c);
      }
  return out;
}

inline json cos_config_to_json(const CosConfig& c) { return json{{"tau", c.tau}}; }

inline CosConfig cos_config_from_json(const json& j, CosConfig c = {}) {
  c.tau = optional_field<double>(j, "tau", c.tau, "cos config");
  c.validate();
  return c;
}

inline json ap_config_to_json(const ApConfig& c) {
  return json{{"damping", c.damping},
              {"max_iterations", c.max_iterations},
              {"convergence_window", c.convergence_window},
              {"preference_offset", c.preference_offset},
              {"window_secs", c.window_secs},
              {"threshold", c.threshold},
              {"seed", c.seed},
              {"noise", c.noise}};
}

inline ApConfig ap_config_from_json(const json& j, ApConfig c = {}) {
  const std::string where = "ap config";
  c.damping = optional_field<double>(j, "damping", c.damping, where);
  c.max_iterations = optional_field<int>(j, "max_iterations", c.max_iterations, where);
  c.convergence_window = optional_field<int>(j, "convergence_window", c.convergence_window, where);
  c.preference_offset = optional_field<double>(j, "preference_offset", c.preference_offset, where);
  c.window_secs = optional_field<double>(j, "window_secs", c.window_secs, where);
  c.threshold = optional_field<double>(j, "threshold", c.threshold, where);
  c.seed = optional_field<std::uint64_t>(j, "seed", c.seed, where);
  c.noise = optional_field<double>(j, "noise", c.noise, where);
  c.validate();
  return c;
}

}  // namespace streamsum

#endif
