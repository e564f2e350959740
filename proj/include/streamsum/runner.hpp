#ifndef STREAMSUM_RUNNER_HPP
#define STREAMSUM_RUNNER_HPP

// Trained-system bundles and the single-pass online runner shared by every
// system.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamsum/baselines.hpp"
#include "streamsum/corpus.hpp"
#include "streamsum/features.hpp"
#include "streamsum/learner.hpp"
#include "streamsum/policy.hpp"
#include "streamsum/resources.hpp"

namespace streamsum {

inline constexpr int kSystemFormatVersion = 1;

/// Everything `run` needs: fitted resources, the selected policy and the
/// training metadata.
struct SystemBundle {
  Resources resources;
  PolicyModel policy;
  json metadata = json::object();
};

inline json bundle_to_json(const SystemBundle& b) {
  return json{{"format", "streamsum-system"},
              {"version", kSystemFormatVersion},
              {"metadata", b.metadata},
              {"resources", resources_to_json(b.resources)},
              {"policy", model_to_json(b.policy)}};
}

inline SystemBundle bundle_from_json(const json& j) {
  const std::string where = "model bundle";
  if (optional_field<std::string>(j, "format", "", where) != "streamsum-system")
    throw ParseError(where, "not a trained system bundle");
  if (require_field<int>(j, "version", where) != kSystemFormatVersion)
    throw ParseError(where, "unsupported format version");
  SystemBundle b;
  b.metadata = optional_field<json>(j, "metadata", json::object(), where);
  b.resources = resources_from_json(require_field<json>(j, "resources", where));
  b.policy = model_from_json(require_field<json>(j, "policy", where), registry_hash(feature_names()));
  if (b.policy.dimension() != Featurizer::dimension())
    throw ValidationError("model bundle: policy dimension does not match the feature map");
  return b;
}

inline SystemBundle bundle_from(const TrainedSystem& sys) {
  SystemBundle b;
  b.resources = sys.resources;
  b.policy = sys.policy();
  b.metadata = json{{"trained_on", sys.trained_on},
                    {"lols", lols_config_to_json(sys.config)},
                    {"training_streams", sys.training_streams},
                    {"snapshots", sys.run.snapshots.size()},
                    {"selected_snapshot", sys.run.selected},
                    {"dev_f1", sys.run.dev_f1},
                    {"latent_k", sys.resources.config.latent_k}};
  return b;
}

// ---------------------------------------------------------------------------
// Online runner

enum class SystemKind { Ls, LsCos, Cos, ApSal, Oracle };

inline SystemKind parse_system(const std::string& s) {
  if (s == "ls") return SystemKind::Ls;
  if (s == "lscos") return SystemKind::LsCos;
  if (s == "cos") return SystemKind::Cos;
  if (s == "apsal") return SystemKind::ApSal;
  if (s == "oracle") return SystemKind::Oracle;
  throw ValidationError("unknown system '" + s + "' (expected ls, lscos, cos, apsal or oracle)");
}

inline const char* parse_system_name(SystemKind k) {
  switch (k) {
    case SystemKind::Ls: return "ls";
    case SystemKind::LsCos: return "lscos";
    case SystemKind::Cos: return "cos";
    case SystemKind::ApSal: return "apsal";
    case SystemKind::Oracle: return "oracle";
  }
  return "?";
}

struct RunOptions {
  SystemKind system = SystemKind::Ls;
  CosConfig cos;  // tau also drives the LsCos filter
  ApConfig ap;
  bool first_sentences_only = false;
};

/// Feeds one sentence at a time; emits updates through `sink` as soon as they
/// are decided. No decision looks past the current sentence (APSal commits a
/// window once a later sentence, or the end of the stream, closes it).
class OnlineRunner {
 public:
  using Sink = std::function<void(const Update&)>;

  OnlineRunner(const Query& query, const SystemBundle& bundle, std::shared_ptr<const DocumentTable> documents,
               RunOptions options, Sink sink, const JudgmentSet* judgments = nullptr,
               std::span<const Nugget> nuggets = {})
      : query_(query),
        options_(std::move(options)),
        sink_(std::move(sink)),
        preparer_(query, bundle.resources, std::move(documents)),
        learned_(bundle.policy, &bundle.resources.scaler) {
    options_.cos.validate();
    options_.ap.validate();
    if (options_.system == SystemKind::Oracle) {
      if (!judgments) throw ValidationError("the oracle system needs judgments");
      preparer_.set_judgments(*judgments, nuggets);
    }
  }

  void push(const Sentence& s) {
    if (finished_) throw ValidationError("OnlineRunner: push after finish");
    if (options_.first_sentences_only && s.sent_index != 0) return;
    if (options_.system == SystemKind::ApSal) {
      const auto w = window_of(s.timestamp);
      if (window_open_ && w != window_) close_window();
      window_ = w;
      window_open_ = true;
    }
    preparer_.push(s);
    const PreparedStream& ps = preparer_.prepared();
    const std::size_t t = ps.size() - 1;
    if (state_.covered.size() != ps.num_nuggets) state_.covered.assign(ps.num_nuggets, 0);
    switch (options_.system) {
      case SystemKind::Ls:
      case SystemKind::LsCos:
      case SystemKind::Oracle: {
        const std::uint8_t a =
            options_.system == SystemKind::Oracle ? oracle_.decide(ps, state_) : learned_.decide(ps, state_);
        state_.apply(ps, a);
        if (a == kSelect && (options_.system != SystemKind::LsCos ||
                             max_similarity(ps.latent[t], ps.latent, emitted_) < options_.cos.tau))
          emit(ps, t);
        break;
      }
      case SystemKind::Cos:
        if (s.sent_index == 0 && max_similarity(ps.latent[t], ps.latent, emitted_) < options_.cos.tau) emit(ps, t);
        break;
      case SystemKind::ApSal:
        window_members_.push_back(t);
        break;
    }
  }

  void finish() {
    if (finished_) return;
    if (options_.system == SystemKind::ApSal && window_open_) close_window();
    finished_ = true;
  }

  const PreparedStream& prepared() const { return preparer_.prepared(); }
  std::span<const std::size_t> emitted() const { return emitted_; }

 private:
  std::int64_t window_of(Timestamp ts) const {
    return static_cast<std::int64_t>(
        std::floor(static_cast<double>(ts - query_.start) / options_.ap.window_secs));
  }

  void emit(const PreparedStream& ps, std::size_t t, std::optional<Timestamp> time = std::nullopt) {
    emitted_.push_back(t);
    auto u = make_update(query_.id, ps.stream.sentences[t]);
    if (time) u.time = *time;
    if (sink_) sink_(u);
  }

  void close_window() {
    const PreparedStream& ps = preparer_.prepared();
    const auto m = static_cast<Eigen::Index>(window_members_.size());
    if (m > 0) {
      Eigen::MatrixXd S(m, m);
      Eigen::VectorXd p(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto ti = window_members_[static_cast<std::size_t>(i)];
        p(i) = ps.content_prob(ti) + options_.ap.preference_offset;
        for (Eigen::Index k = 0; k < m; ++k)
          S(i, k) = cosine(ps.latent[ti], ps.latent[window_members_[static_cast<std::size_t>(k)]]);
      }
      ApConfig local = options_.ap;
      local.seed = mix_window_seed(options_.ap.seed, window_);
      const auto ap = ap_cluster(S, p, local);
      const auto end = query_.start +
                       static_cast<Timestamp>(std::llround(static_cast<double>(window_ + 1) * options_.ap.window_secs));
      for (auto e : ap.exemplars) {
        const auto t = window_members_[e];
        if (max_similarity(ps.latent[t], ps.latent, emitted_) < options_.ap.threshold) emit(ps, t, end);
      }
    }
    window_members_.clear();
    window_open_ = false;
  }

  const Query& query_;
  RunOptions options_;
  Sink sink_;
  StreamPreparer preparer_;
  LearnedPolicy learned_;
  OraclePolicy oracle_;
  SummaryState state_;
  std::vector<std::size_t> emitted_;
  std::vector<std::size_t> window_members_;
  std::int64_t window_ = 0;
  bool window_open_ = false;
  bool finished_ = false;
};

/// Convenience wrapper: runs a whole stream and returns the emitted updates.
inline std::vector<Update> run_system(const SentenceStream& stream, const Query& query, const SystemBundle& bundle,
                                      const RunOptions& options, const JudgmentSet* judgments = nullptr,
                                      std::span<const Nugget> nuggets = {}) {
  std::vector<Update> out;
  OnlineRunner runner(query, bundle, stream.documents, options, [&](const Update& u) { out.push_back(u); },
                      judgments, nuggets);
  for (const auto& s : stream.sentences) runner.push(s);
  runner.finish();
  return out;
}

}  // namespace streamsum

#endif
