#ifndef STREAMSUM_LEARNER_HPP
#define STREAMSUM_LEARNER_HPP

// Locally optimal learning to search: roll in with the learned policy, roll
// out each action with a beta-mixture of oracle and learned policy, regress
// the Dice-loss costs, and pick the best snapshot on a development set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "streamsum/corpus.hpp"
#include "streamsum/features.hpp"
#include "streamsum/metrics.hpp"
#include "streamsum/policy.hpp"
#include "streamsum/resources.hpp"

namespace streamsum {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(b + 0x51ed27ULL));
}

struct LolsConfig {
  enum class Coin { PerAction, PerState };

  int passes = 10;
  double beta = 0.5;
  double eta = 0.01;
  bool inv_sqrt_decay = false;
  std::uint64_t seed = 1;
  Coin coin = Coin::PerAction;
  std::size_t downsample_length = 100;
  int samples_per_event = 10;
  bool shuffle = false;
  int cross_fit_folds = 5;  // content classifier folds for training streams; < 2 disables

  void validate() const {
    if (passes < 1) throw ValidationError("lols: passes must be >= 1");
    if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("lols: beta must lie in (0, 1)");
    if (!(eta > 0.0)) throw ValidationError("lols: learning rate must be > 0");
    if (downsample_length < 1) throw ValidationError("lols: downsample length must be >= 1");
    if (samples_per_event < 1) throw ValidationError("lols: samples per event must be >= 1");
  }
};

inline json lols_config_to_json(const LolsConfig& c) {
  return json{{"passes", c.passes},
              {"beta", c.beta},
              {"eta", c.eta},
              {"inv_sqrt_decay", c.inv_sqrt_decay},
              {"seed", c.seed},
              {"coin", c.coin == LolsConfig::Coin::PerAction ? "per_action" : "per_state"},
              {"downsample_length", c.downsample_length},
              {"samples_per_event", c.samples_per_event},
              {"shuffle", c.shuffle},
              {"cross_fit_folds", c.cross_fit_folds}};
}

inline LolsConfig lols_config_from_json(const json& j, LolsConfig c = {}) {
  const std::string where = "lols config";
  c.passes = optional_field<int>(j, "passes", c.passes, where);
  c.beta = optional_field<double>(j, "beta", c.beta, where);
  c.eta = optional_field<double>(j, "eta", c.eta, where);
  c.inv_sqrt_decay = optional_field<bool>(j, "inv_sqrt_decay", c.inv_sqrt_decay, where);
  c.seed = optional_field<std::uint64_t>(j, "seed", c.seed, where);
  const auto coin = optional_field<std::string>(j, "coin", "per_action", where);
  if (coin == "per_action")
    c.coin = LolsConfig::Coin::PerAction;
  else if (coin == "per_state")
    c.coin = LolsConfig::Coin::PerState;
  else
    throw ParseError(where, "coin must be per_action or per_state");
  c.downsample_length = optional_field<std::size_t>(j, "downsample_length", c.downsample_length, where);
  c.samples_per_event = optional_field<int>(j, "samples_per_event", c.samples_per_event, where);
  c.shuffle = optional_field<bool>(j, "shuffle", c.shuffle, where);
  c.cross_fit_folds = optional_field<int>(j, "cross_fit_folds", c.cross_fit_folds, where);
  c.validate();
  return c;
}

/// The oracle's greedy trajectory from the root.
inline Decisions oracle_reference(const PreparedStream& ps) {
  OraclePolicy oracle;
  return run_policy(ps, oracle).decisions;
}

/// s_t reached by executing the learned policy for t decisions.
inline SummaryState rollin(const PolicyModel& model, const PreparedStream& ps, std::size_t t,
                           const FeatureScaler* scaler = nullptr) {
  if (t > ps.size()) throw ValidationError("rollin: t beyond stream end");
  LearnedPolicy learned(model, scaler);
  SummaryState s = SummaryState::initial(ps);
  while (s.t < t) s.apply(ps, learned.decide(ps, s));
  return s;
}

/// Full decision sequence: the state's prefix, the forced action, then the
/// roll-out policy's decisions to the end of the stream.
inline Decisions rollout(const PreparedStream& ps, SummaryState state, std::uint8_t forced, Policy& rollout_policy) {
  if (state.done(ps)) throw ValidationError("rollout: state is already terminal");
  state.apply(ps, forced);
  return run_policy(ps, rollout_policy, std::move(state)).decisions;
}

struct CollectStats {
  double mean_rollout_loss = 0.0;  // raw Dice cost over all roll-outs
  double training_loss = 0.0;      // normalized cost of the learned policy's own choices
  std::size_t oracle_rollouts = 0;
};

/// Gamma for one stream: 2T examples, costs normalized per state so the
/// cheaper action costs 0.
inline std::vector<CostExample> collect_examples(const PolicyModel& model, const PreparedStream& ps,
                                                 const Decisions& reference, double beta, std::mt19937_64& rng,
                                                 const FeatureScaler* scaler = nullptr,
                                                 LolsConfig::Coin coin = LolsConfig::Coin::PerAction,
                                                 CollectStats* stats = nullptr) {
  if (reference.size() != ps.size()) throw ValidationError("collect_examples: reference length mismatch");
  std::vector<CostExample> gamma;
  gamma.reserve(2 * ps.size());
  if (ps.size() == 0) return gamma;

  LearnedPolicy learned(model, scaler);
  OraclePolicy oracle;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // The learned policy's own end-to-end trajectory: its roll-in prefix at
  // every t, and the roll-out result whenever the forced action agrees with it.
  const SummaryState own = run_policy(ps, learned);
  const double own_cost = dice_loss(own.decisions, reference);

  CollectStats local;
  SummaryState state = SummaryState::initial(ps);
  for (std::size_t t = 0; t < ps.size(); ++t) {
    const auto phi_span = learned.features(ps, state);
    std::vector<double> phi(phi_span.begin(), phi_span.end());
    std::array<double, 2> cost{};
    bool state_coin = coin == LolsConfig::Coin::PerState && unit(rng) < beta;
    for (std::uint8_t a = 0; a < 2; ++a) {
      const bool use_oracle = coin == LolsConfig::Coin::PerAction ? unit(rng) < beta : state_coin;
      if (use_oracle) {
        cost[a] = dice_loss(rollout(ps, state, a, oracle), reference);
        ++local.oracle_rollouts;
      } else if (a == own.decisions[t]) {
        cost[a] = own_cost;
      } else {
        cost[a] = dice_loss(rollout(ps, state, a, learned), reference);
      }
      local.mean_rollout_loss += cost[a];
    }
    const double floor = std::min(cost[0], cost[1]);
    for (std::uint8_t a = 0; a < 2; ++a) gamma.push_back({phi, a, cost[a] - floor});
    local.training_loss += cost[own.decisions[t]] - floor;
    state.apply(ps, own.decisions[t]);
  }
  local.mean_rollout_loss /= static_cast<double>(2 * ps.size());
  local.training_loss /= static_cast<double>(ps.size());
  if (stats) *stats = local;
  return gamma;
}

/// Macro-averaged per-event F1 of the learned policy over judged streams.
inline double policy_macro_f1(const PolicyModel& model, std::span<const PreparedStream> streams,
                              const FeatureScaler* scaler) {
  if (streams.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ps : streams) {
    LearnedPolicy learned(model, scaler);
    const auto s = run_policy(ps, learned);
    total += event_f1(s.gain, s.updates.size(), ps.num_nuggets);
  }
  return total / static_cast<double>(streams.size());
}

struct TrainingStream {
  PreparedStream stream;
  Decisions reference;
};

struct IterationRecord {
  std::size_t snapshot = 0;  // index of the model produced by this update
  int pass = 0;
  std::string query_id;
  std::size_t gamma_size = 0;
  double mean_rollout_loss = 0.0;
  double training_loss = 0.0;
  double eta = 0.0;
};

inline json iteration_to_json(const IterationRecord& r) {
  return json{{"snapshot", r.snapshot},           {"pass", r.pass},
              {"query_id", r.query_id},           {"gamma_size", r.gamma_size},
              {"mean_rollout_loss", r.mean_rollout_loss}, {"training_loss", r.training_loss},
              {"eta", r.eta}};
}

struct TrainingRun {
  std::vector<PolicyModel> snapshots;
  std::vector<IterationRecord> iterations;
  std::vector<double> dev_f1;
  std::size_t selected = 0;

  const PolicyModel& selected_model() const { return snapshots.at(selected); }
};

/// Argmax over dev F1; the earliest snapshot wins ties.
inline std::size_t select_snapshot(std::span<const double> dev_f1) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dev_f1.size(); ++i)
    if (dev_f1[i] > dev_f1[best]) best = i;
  return best;
}

/// N passes over the training streams; one SGD update and one snapshot per
/// stream visit. Deterministic given config.seed.
inline TrainingRun lols_train(std::span<const TrainingStream> training, std::span<const PreparedStream> dev,
                              const LolsConfig& config, const FeatureScaler* scaler = nullptr,
                              const std::string& registry = registry_hash(feature_names()),
                              const std::function<void(const IterationRecord&)>& on_iteration = {}) {
  config.validate();
  if (training.empty()) throw ValidationError("lols_train: empty training set");
  TrainingRun run;
  run.snapshots.push_back(PolicyModel::zeros(Featurizer::dimension(), registry));
  std::mt19937_64 rng(mix_seed(config.seed, 0x1015));
  std::size_t step = 0;
  for (int pass = 1; pass <= config.passes; ++pass) {
    for (const auto& item : training) {
      const PolicyModel& current = run.snapshots.back();
      CollectStats stats;
      auto gamma = collect_examples(current, item.stream, item.reference, config.beta, rng, scaler, config.coin, &stats);
      if (config.shuffle) std::shuffle(gamma.begin(), gamma.end(), rng);
      ++step;
      const double eta = config.inv_sqrt_decay ? config.eta / std::sqrt(static_cast<double>(step)) : config.eta;
      run.snapshots.push_back(sgd_update(current, gamma, eta));
      if (!std::isfinite(stats.training_loss)) throw ComputeError("lols_train: non-finite training loss");
      IterationRecord rec{run.snapshots.size() - 1, pass, item.stream.query_id, gamma.size(),
                          stats.mean_rollout_loss, stats.training_loss, eta};
      run.iterations.push_back(rec);
      if (on_iteration) on_iteration(rec);
    }
  }
  if (dev.empty()) {
    run.dev_f1.assign(run.snapshots.size(), 0.0);
    run.selected = run.snapshots.size() - 1;
  } else {
    for (const auto& m : run.snapshots) run.dev_f1.push_back(policy_macro_f1(m, dev, scaler));
    run.selected = select_snapshot(run.dev_f1);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Full training pipeline

/// Standardization fitted on raw features along the oracle trajectories.
inline FeatureScaler fit_feature_scaler(std::span<const PreparedStream> streams, double clip = 10.0) {
  std::vector<std::vector<double>> rows;
  Featurizer raw;
  for (const auto& ps : streams) {
    OraclePolicy oracle;
    SummaryState s = SummaryState::initial(ps);
    while (!s.done(ps)) {
      auto f = raw.raw(ps, s.t, s.updates);
      rows.emplace_back(f.begin(), f.end());
      s.apply(ps, oracle.decide(ps, s));
    }
  }
  auto scaler = FeatureScaler::fit(rows);
  scaler.clip = clip;
  return scaler;
}

struct TrainedSystem {
  Resources resources;
  TrainingRun run;
  std::vector<std::string> trained_on;  // training query ids
  LolsConfig config;
  std::size_t training_streams = 0;

  const PolicyModel& policy() const { return run.selected_model(); }
};

inline PreparedStream prepare_event(const EventData& ev, const Resources& res) {
  return prepare_stream(ev.stream, ev.query, res, &ev.judgments, ev.nuggets);
}

/// Downsampled training streams: samples_per_event per event, seeds derived
/// from (seed, event index, sample index).
inline std::vector<SentenceStream> training_samples(const EventData& ev, std::size_t event_index,
                                                    const LolsConfig& config) {
  std::vector<SentenceStream> out;
  for (int s = 0; s < config.samples_per_event; ++s) {
    auto ds = downsample(ev.stream, config.downsample_length, ev.judgments,
                         mix_seed(config.seed, event_index + 1, static_cast<std::uint64_t>(s)));
    out.push_back(std::move(ds.stream));
  }
  return out;
}

inline TrainedSystem train_system(std::span<const EventData> training, std::span<const EventData> dev,
                                  const TextCorpora& corpora, const FeatureConfig& features, const LolsConfig& config,
                                  const std::function<void(const IterationRecord&)>& on_iteration = {}) {
  config.validate();
  if (training.empty()) throw ValidationError("train_system: empty training set");
  TrainedSystem sys;
  sys.config = config;
  sys.resources = build_resources(training, corpora, features);
  for (const auto& ev : training) sys.trained_on.push_back(ev.query.id);

  // Training streams see content probabilities from a classifier that was
  // not fitted on their own event, as held-out streams will.
  std::vector<Resources> folds;
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(config.cross_fit_folds, 0)),
                                              training.size());
  if (k >= 2) {
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<EventData> others;
      for (std::size_t i = 0; i < training.size(); ++i)
        if (i % k != f) others.push_back(training[i]);
      Resources r = sys.resources;
      auto labeled = content_training_data(others);
      if (!labeled.empty()) r.classifier = train_content_classifier(labeled, features.tree);
      folds.push_back(std::move(r));
    }
  }

  std::vector<PreparedStream> prepared;
  for (std::size_t i = 0; i < training.size(); ++i) {
    const auto& ev = training[i];
    const Resources& res = k >= 2 ? folds[i % k] : sys.resources;
    for (auto& sample : training_samples(ev, i, config))
      prepared.push_back(prepare_stream(sample, ev.query, res, &ev.judgments, ev.nuggets));
  }
  sys.resources.scaler = fit_feature_scaler(prepared);

  std::vector<TrainingStream> items;
  items.reserve(prepared.size());
  for (auto& ps : prepared) {
    auto ref = oracle_reference(ps);
    items.push_back({std::move(ps), std::move(ref)});
  }
  sys.training_streams = items.size();
  std::vector<PreparedStream> dev_prepared;
  for (const auto& ev : dev) dev_prepared.push_back(prepare_event(ev, sys.resources));
  sys.run = lols_train(items, dev_prepared, config, &sys.resources.scaler, registry_hash(feature_names()),
                       on_iteration);
  return sys;
}

/// Runs the learned policy online over a prepared stream.
inline std::vector<Update> run_learned(const PreparedStream& ps, const PolicyModel& model,
                                       const FeatureScaler* scaler) {
  LearnedPolicy learned(model, scaler);
  return updates_of(ps, run_policy(ps, learned));
}

struct FoldRecord {
  std::string eval_query;
  std::vector<std::string> trained_on;
  std::size_t selected_snapshot = 0;
  double selected_dev_f1 = 0.0;
};

struct LooResult {
  std::vector<MetricsReport> reports;
  std::vector<FoldRecord> folds;
  std::vector<std::vector<Update>> updates;
};

/// Leave-one-out over `events`: each fold trains on the others, selects on
/// `dev`, and scores the held-out event's full stream.
inline LooResult leave_one_out(std::span<const EventData> events, std::span<const EventData> dev,
                               const TextCorpora& corpora, const FeatureConfig& features, const LolsConfig& config,
                               double window_secs = kDefaultLatencyWindowSecs) {
  if (events.size() < 2) throw ValidationError("leave_one_out: need at least 2 queries");
  LooResult out;
  for (std::size_t q = 0; q < events.size(); ++q) {
    std::vector<EventData> train;
    for (std::size_t i = 0; i < events.size(); ++i)
      if (i != q) train.push_back(events[i]);
    auto sys = train_system(train, dev, corpora, features, config);
    const auto ps = prepare_event(events[q], sys.resources);
    auto updates = run_learned(ps, sys.policy(), &sys.resources.scaler);
    out.reports.push_back(
        evaluate_run(updates, events[q].query, events[q].nuggets, events[q].judgments, window_secs));
    out.folds.push_back({events[q].query.id, sys.trained_on, sys.run.selected, sys.run.dev_f1[sys.run.selected]});
    out.updates.push_back(std::move(updates));
  }
  return out;
}

}  // namespace streamsum

#endif
