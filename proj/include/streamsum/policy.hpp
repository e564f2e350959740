#ifndef STREAMSUM_POLICY_HPP
#define STREAMSUM_POLICY_HPP

// Search states, the Dice-complement loss, the greedy oracle and the learned
// cost-sensitive linear policy.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "streamsum/error.hpp"
#include "streamsum/features.hpp"
#include "streamsum/io.hpp"
#include "streamsum/metrics.hpp"

namespace streamsum {

using Decisions = std::vector<std::uint8_t>;

enum Action : std::uint8_t { kSkip = 0, kSelect = 1 };

/// 1 - 2 * sum(a_i * b_i) / sum(a_i + b_i); 0 when both are all-skip.
inline double dice_loss(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size())
    throw ValidationError("dice_loss: length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  std::size_t overlap = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    overlap += static_cast<std::size_t>(a[i] && b[i]);
    total += static_cast<std::size_t>(a[i] != 0) + static_cast<std::size_t>(b[i] != 0);
  }
  if (total == 0) return 0.0;
  return 1.0 - 2.0 * static_cast<double>(overlap) / static_cast<double>(total);
}

/// Per-event F1 of expected gain and comprehensiveness.
inline double event_f1(double g, std::size_t num_updates, std::size_t num_nuggets) {
  return f1(expected_gain(g, num_updates), comprehensiveness(g, num_nuggets));
}

/// Per-event F1 of selecting `positions` from a judged prepared stream.
inline double event_f1_of(const PreparedStream& ps, std::span<const std::size_t> positions) {
  if (!ps.judged) throw ValidationError("event_f1_of: stream has no judgments");
  std::vector<char> covered(ps.num_nuggets, 0);
  int g = 0;
  for (auto t : positions)
    for (int n : ps.nuggets.at(t))
      if (!covered[static_cast<std::size_t>(n)]) {
        covered[static_cast<std::size_t>(n)] = 1;
        ++g;
      }
  return event_f1(g, positions.size(), ps.num_nuggets);
}

/// s_t: decisions for positions 0..t-1 and the resulting update set.
struct SummaryState {
  std::size_t t = 0;
  Decisions decisions;
  std::vector<std::size_t> updates;
  std::vector<char> covered;  // per nugget index
  int gain = 0;

  static SummaryState initial(const PreparedStream& ps) {
    SummaryState s;
    s.decisions.reserve(ps.size());
    s.covered.assign(ps.num_nuggets, 0);
    return s;
  }

  int new_nuggets(const PreparedStream& ps) const {
    int fresh = 0;
    for (int n : ps.nuggets[t]) fresh += covered[static_cast<std::size_t>(n)] ? 0 : 1;
    return fresh;
  }

  void apply(const PreparedStream& ps, std::uint8_t action) {
    if (action == kSelect) {
      updates.push_back(t);
      for (int n : ps.nuggets[t]) {
        auto& c = covered[static_cast<std::size_t>(n)];
        if (!c) {
          c = 1;
          ++gain;
        }
      }
    }
    decisions.push_back(action);
    ++t;
  }

  bool done(const PreparedStream& ps) const { return t >= ps.size(); }
};

/// Greedy oracle: select iff adding sentence t strictly raises per-event F1.
inline std::uint8_t oracle_decide(const PreparedStream& ps, const SummaryState& state) {
  if (!ps.judged) throw ValidationError("oracle_decide: stream has no judgments");
  const double before = event_f1(state.gain, state.updates.size(), ps.num_nuggets);
  const double after = event_f1(state.gain + state.new_nuggets(ps), state.updates.size() + 1, ps.num_nuggets);
  return after > before ? kSelect : kSkip;
}

/// Judgment-level form of the oracle decision for a candidate sentence given
/// the current update list.
inline std::uint8_t oracle_decide(std::span<const Update> current, const SentenceKey& candidate,
                                  const JudgmentSet& judgments, std::size_t num_nuggets) {
  const double g = gain(current, judgments);
  std::vector<Update> extended(current.begin(), current.end());
  extended.push_back(Update{"", candidate.doc_id, candidate.sent_index, 0, ""});
  const double g2 = gain(extended, judgments);
  const double before = event_f1(g, current.size(), num_nuggets);
  const double after = event_f1(g2, extended.size(), num_nuggets);
  return after > before ? kSelect : kSkip;
}

// ---------------------------------------------------------------------------
// Learned policy

/// Linear cost regressor, one weight vector and bias per action.
struct PolicyModel {
  std::array<std::vector<double>, 2> weights;
  std::array<double, 2> bias{0.0, 0.0};
  std::string registry;  // hash of the feature registry the weights index
  long long updates_seen = 0;

  static PolicyModel zeros(std::size_t dim, std::string registry_hash = {}) {
    PolicyModel m;
    m.weights = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
    m.registry = std::move(registry_hash);
    return m;
  }

  std::size_t dimension() const { return weights[0].size(); }

  bool finite() const {
    for (const auto& w : weights)
      for (double x : w)
        if (!std::isfinite(x)) return false;
    return std::isfinite(bias[0]) && std::isfinite(bias[1]);
  }
};

struct CostExample {
  std::vector<double> features;
  std::uint8_t action = kSkip;
  double cost = 0.0;
};

inline std::pair<double, double> predict_costs(const PolicyModel& model, std::span<const double> phi) {
  if (phi.size() != model.dimension())
    throw ValidationError("predict_costs: feature dimension " + std::to_string(phi.size()) + " != model dimension " +
                          std::to_string(model.dimension()));
  double c0 = model.bias[0], c1 = model.bias[1];
  const double* w0 = model.weights[0].data();
  const double* w1 = model.weights[1].data();
  for (std::size_t i = 0; i < phi.size(); ++i) {
    c0 += w0[i] * phi[i];
    c1 += w1[i] * phi[i];
  }
  return {c0, c1};
}

/// Argmin of predicted costs; exact ties skip.
inline std::uint8_t policy_action(const PolicyModel& model, std::span<const double> phi) {
  const auto [c0, c1] = predict_costs(model, phi);
  return c1 < c0 ? kSelect : kSkip;
}

/// One squared-error gradient step on the example's action:
/// w_a -= eta * (w_a . phi + b_a - cost) * phi, b_a -= eta * residual.
inline void sgd_step(PolicyModel& model, std::span<const double> phi, std::uint8_t action, double cost, double eta) {
  auto& w = model.weights[action];
  if (phi.size() != w.size()) throw ValidationError("sgd_update: feature dimension mismatch");
  double pred = model.bias[action];
  for (std::size_t i = 0; i < phi.size(); ++i) pred += w[i] * phi[i];
  const double residual = pred - cost;
  if (!std::isfinite(residual)) throw ComputeError("sgd_update: non-finite gradient (feature blowup?)");
  const double step = eta * residual;
  for (std::size_t i = 0; i < phi.size(); ++i) w[i] -= step * phi[i];
  model.bias[action] -= step;
  ++model.updates_seen;
}

/// Processes examples in the given order.
inline PolicyModel sgd_update(PolicyModel model, std::span<const CostExample> examples, double eta) {
  if (!(eta > 0.0)) throw ValidationError("sgd_update: learning rate must be > 0");
  for (const auto& ex : examples) sgd_step(model, ex.features, ex.action, ex.cost, eta);
  if (!model.finite()) throw ComputeError("sgd_update: weights diverged");
  return model;
}

inline json model_to_json(const PolicyModel& m) {
  return json{{"format", "streamsum-policy"},
              {"version", 1},
              {"registry", m.registry},
              {"dimension", m.dimension()},
              {"weights_skip", m.weights[0]},
              {"weights_select", m.weights[1]},
              {"bias", {m.bias[0], m.bias[1]}},
              {"updates_seen", m.updates_seen}};
}

/// Refuses models whose registry hash differs from `expected_registry`.
inline PolicyModel model_from_json(const json& j, const std::string& expected_registry) {
  const std::string where = "policy model";
  if (optional_field<std::string>(j, "format", "", where) != "streamsum-policy")
    throw ParseError(where, "not a policy model");
  if (require_field<int>(j, "version", where) != 1) throw ParseError(where, "unsupported version");
  PolicyModel m;
  m.registry = require_field<std::string>(j, "registry", where);
  if (!expected_registry.empty() && m.registry != expected_registry)
    throw ValidationError("policy model was trained against feature registry " + m.registry +
                          " but the current registry is " + expected_registry);
  m.weights[0] = require_field<std::vector<double>>(j, "weights_skip", where);
  m.weights[1] = require_field<std::vector<double>>(j, "weights_select", where);
  auto b = require_field<std::vector<double>>(j, "bias", where);
  if (b.size() != 2) throw ParseError(where, "bias must have 2 entries");
  m.bias = {b[0], b[1]};
  m.updates_seen = optional_field<long long>(j, "updates_seen", 0, where);
  if (m.weights[0].size() != m.weights[1].size() ||
      m.weights[0].size() != require_field<std::size_t>(j, "dimension", where))
    throw ValidationError("policy model: weight dimensions disagree");
  if (!m.finite()) throw ValidationError("policy model: non-finite weights");
  return m;
}

// ---------------------------------------------------------------------------
// Policies over prepared streams

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::uint8_t decide(const PreparedStream& ps, const SummaryState& state) = 0;
};

class OraclePolicy final : public Policy {
 public:
  std::uint8_t decide(const PreparedStream& ps, const SummaryState& state) override {
    return oracle_decide(ps, state);
  }
};

class LearnedPolicy final : public Policy {
 public:
  LearnedPolicy(const PolicyModel& model, const FeatureScaler* scaler) : model_(model), featurizer_(scaler) {}

  std::uint8_t decide(const PreparedStream& ps, const SummaryState& state) override {
    return policy_action(model_, featurizer_(ps, state.t, state.updates));
  }

  std::span<const double> features(const PreparedStream& ps, const SummaryState& state) {
    return featurizer_(ps, state.t, state.updates);
  }

 private:
  const PolicyModel& model_;
  Featurizer featurizer_;
};

/// Selects each sentence independently with probability p.
class RandomPolicy final : public Policy {
 public:
  RandomPolicy(double p, std::uint64_t seed) : p_(p), rng_(seed) {}

  std::uint8_t decide(const PreparedStream&, const SummaryState&) override {
    return std::bernoulli_distribution(p_)(rng_) ? kSelect : kSkip;
  }

 private:
  double p_;
  std::mt19937_64 rng_;
};

/// Continues `state` to the end of the stream under `policy`.
inline SummaryState run_policy(const PreparedStream& ps, Policy& policy, SummaryState state) {
  while (!state.done(ps)) state.apply(ps, policy.decide(ps, state));
  return state;
}

inline SummaryState run_policy(const PreparedStream& ps, Policy& policy) {
  return run_policy(ps, policy, SummaryState::initial(ps));
}

inline std::vector<Update> updates_of(const PreparedStream& ps, const SummaryState& state) {
  std::vector<Update> out;
  out.reserve(state.updates.size());
  for (auto t : state.updates) out.push_back(make_update(ps.query_id, ps.stream.sentences[t]));
  return out;
}

}  // namespace streamsum

#endif
