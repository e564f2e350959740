#ifndef STREAMSUM_METRICS_HPP
#define STREAMSUM_METRICS_HPP

// Nugget-based update-summary metrics: gain, latency-penalized gain,
// expected gain, comprehensiveness and their harmonic mean.

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "streamsum/corpus.hpp"
#include "streamsum/io.hpp"

namespace streamsum {

inline constexpr double kDefaultLatencyWindowSecs = 6.0 * 3600.0;

/// A selected sentence and the time the system committed to it.
struct Update {
  std::string query_id;
  std::string doc_id;
  int sent_index = 0;
  Timestamp time = 0;
  std::string raw_text;

  SentenceKey key() const { return {doc_id, sent_index}; }
};

inline Update make_update(const std::string& query_id, const Sentence& s) {
  return {query_id, s.doc_id, s.sent_index, s.timestamp, s.raw_text};
}

inline int gain(std::span<const Update> updates, const JudgmentSet& judgments) {
  std::set<std::string> matched;
  for (const auto& u : updates) {
    const auto& ids = judgments.nuggets_of(u.key());
    matched.insert(ids.begin(), ids.end());
  }
  return static_cast<int>(matched.size());
}

/// clamp(1 - delay / window, 0, 1); non-positive delays earn full credit.
inline double latency_discount(double delay, double window) {
  return std::clamp(1.0 - delay / window, 0.0, 1.0);
}

/// Earliest matching update time per matched nugget.
inline std::map<std::string, Timestamp> first_match_times(std::span<const Update> updates,
                                                          const JudgmentSet& judgments) {
  std::map<std::string, Timestamp> first;
  for (const auto& u : updates) {
    for (const auto& id : judgments.nuggets_of(u.key())) {
      auto [it, inserted] = first.emplace(id, u.time);
      if (!inserted) it->second = std::min(it->second, u.time);
    }
  }
  return first;
}

inline double latency_gain(std::span<const Update> updates, const JudgmentSet& judgments,
                           std::span<const Nugget> nuggets, double window_secs = kDefaultLatencyWindowSecs) {
  if (!(window_secs > 0.0)) throw ValidationError("latency window must be > 0");
  std::unordered_map<std::string, Timestamp> nugget_time;
  for (const auto& n : nuggets) nugget_time[n.id] = n.timestamp;
  double total = 0.0;
  for (const auto& [id, t] : first_match_times(updates, judgments)) {
    auto it = nugget_time.find(id);
    if (it == nugget_time.end()) throw ValidationError("latency_gain: unknown nugget '" + id + "'");
    total += latency_discount(static_cast<double>(t - it->second), window_secs);
  }
  return total;
}

inline double expected_gain(double g, std::size_t num_updates) {
  return num_updates == 0 ? 0.0 : g / static_cast<double>(num_updates);
}

inline double comprehensiveness(double g, std::size_t num_nuggets) {
  if (num_nuggets == 0) throw ValidationError("comprehensiveness: query has no nuggets");
  return g / static_cast<double>(num_nuggets);
}

inline double f1(double eg, double comp) {
  const double denom = eg + comp;
  return denom > 0.0 ? 2.0 * eg * comp / denom : 0.0;
}

struct MetricsReport {
  std::string query_id;
  int gain = 0;
  double latency_gain = 0.0;
  double expected_gain = 0.0;
  double comprehensiveness = 0.0;
  double f1 = 0.0;
  double latency_expected_gain = 0.0;
  double latency_comprehensiveness = 0.0;
  double latency_f1 = 0.0;
  double num_updates = 0.0;  // real-valued so macro averages fit the same type
  std::size_t num_nuggets = 0;
  std::map<std::string, Timestamp> first_match;
};

inline MetricsReport evaluate_run(std::span<const Update> updates, const Query& query,
                                  std::span<const Nugget> nuggets, const JudgmentSet& judgments,
                                  double window_secs = kDefaultLatencyWindowSecs) {
  MetricsReport r;
  r.query_id = query.id;
  r.num_nuggets = nuggets.size();
  r.num_updates = static_cast<double>(updates.size());
  r.gain = gain(updates, judgments);
  r.latency_gain = latency_gain(updates, judgments, nuggets, window_secs);
  r.expected_gain = expected_gain(r.gain, updates.size());
  r.comprehensiveness = comprehensiveness(r.gain, nuggets.size());
  r.f1 = f1(r.expected_gain, r.comprehensiveness);
  r.latency_expected_gain = expected_gain(r.latency_gain, updates.size());
  r.latency_comprehensiveness = comprehensiveness(r.latency_gain, nuggets.size());
  r.latency_f1 = f1(r.latency_expected_gain, r.latency_comprehensiveness);
  r.first_match = first_match_times(updates, judgments);
  return r;
}

/// Mean of each per-event column, F1 included (not F1 of the means).
inline MetricsReport macro_average(std::span<const MetricsReport> reports) {
  MetricsReport avg;
  avg.query_id = "macro_average";
  if (reports.empty()) return avg;
  double g = 0.0;
  for (const auto& r : reports) {
    g += r.gain;
    avg.latency_gain += r.latency_gain;
    avg.expected_gain += r.expected_gain;
    avg.comprehensiveness += r.comprehensiveness;
    avg.f1 += r.f1;
    avg.latency_expected_gain += r.latency_expected_gain;
    avg.latency_comprehensiveness += r.latency_comprehensiveness;
    avg.latency_f1 += r.latency_f1;
    avg.num_updates += r.num_updates;
    avg.num_nuggets += r.num_nuggets;
  }
  const double n = static_cast<double>(reports.size());
  avg.gain = static_cast<int>(g / n + 0.5);
  avg.latency_gain /= n;
  avg.expected_gain /= n;
  avg.comprehensiveness /= n;
  avg.f1 /= n;
  avg.latency_expected_gain /= n;
  avg.latency_comprehensiveness /= n;
  avg.latency_f1 /= n;
  avg.num_updates /= n;
  avg.num_nuggets = static_cast<std::size_t>(static_cast<double>(avg.num_nuggets) / n + 0.5);
  return avg;
}

inline json report_to_json(const MetricsReport& r) {
  json first = json::object();
  for (const auto& [id, t] : r.first_match) first[id] = t;
  return json{{"query_id", r.query_id},
              {"gain", r.gain},
              {"latency_gain", r.latency_gain},
              {"expected_gain", r.expected_gain},
              {"comprehensiveness", r.comprehensiveness},
              {"f1", r.f1},
              {"latency_expected_gain", r.latency_expected_gain},
              {"latency_comprehensiveness", r.latency_comprehensiveness},
              {"latency_f1", r.latency_f1},
              {"num_updates", r.num_updates},
              {"num_nuggets", r.num_nuggets},
              {"first_match", first}};
}

/// Per-event rows plus the macro-average row.
inline json batch_report_json(std::span<const MetricsReport> reports, double window_secs) {
  json rows = json::array();
  for (const auto& r : reports) rows.push_back(report_to_json(r));
  auto avg = report_to_json(macro_average(reports));
  avg.erase("first_match");
  avg.erase("gain");
  return json{{"latency_window_secs", window_secs}, {"events", rows}, {"macro_average", avg}};
}

inline std::string format_report_table(std::span<const MetricsReport> reports) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %8s %8s %8s | %8s %8s %8s | %8s\n", "event", "exp.gain", "comp.", "F1",
                "exp.gain", "comp.", "F1", "updates");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-20s %26s | %26s |\n", "", "unpenalized", "latency-penalized");
  out += buf;
  auto row = [&](const MetricsReport& r) {
    std::snprintf(buf, sizeof buf, "%-20.20s %8.3f %8.3f %8.3f | %8.3f %8.3f %8.3f | %8.3f\n", r.query_id.c_str(),
                  r.expected_gain, r.comprehensiveness, r.f1, r.latency_expected_gain, r.latency_comprehensiveness,
                  r.latency_f1, r.num_updates);
    out += buf;
  };
  for (const auto& r : reports) row(r);
  if (reports.size() > 1) row(macro_average(reports));
  return out;
}

// ---------------------------------------------------------------------------
// Update files: one JSON object per line.

inline json update_to_json(const Update& u) {
  return json{{"query_id", u.query_id},
              {"doc_id", u.doc_id},
              {"sent_index", u.sent_index},
              {"timestamp", u.time},
              {"raw_text", u.raw_text}};
}

inline std::string updates_to_jsonl(std::span<const Update> updates) {
  std::vector<json> rows;
  for (const auto& u : updates) rows.push_back(update_to_json(u));
  return to_jsonl(rows);
}

/// Updates grouped by query id, each group kept in file order.
inline std::map<std::string, std::vector<Update>> load_updates(const std::filesystem::path& path) {
  std::map<std::string, std::vector<Update>> out;
  auto rows = read_jsonl(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    Update u;
    u.query_id = require_field<std::string>(rows[i], "query_id", where);
    u.doc_id = require_field<std::string>(rows[i], "doc_id", where);
    u.sent_index = require_field<int>(rows[i], "sent_index", where);
    u.time = require_field<Timestamp>(rows[i], "timestamp", where);
    u.raw_text = optional_field<std::string>(rows[i], "raw_text", "", where);
    out[u.query_id].push_back(std::move(u));
  }
  return out;
}

}  // namespace streamsum

#endif
