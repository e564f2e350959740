#ifndef STREAMSUM_ANALYSIS_HPP
#define STREAMSUM_ANALYSIS_HPP

// Per-system error breakdown and run manifests.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "streamsum/corpus.hpp"
#include "streamsum/io.hpp"
#include "streamsum/metrics.hpp"

namespace streamsum {

struct ErrorBreakdown {
  std::size_t miss_lead = 0;
  std::size_t miss_body = 0;
  std::size_t empty = 0;
  std::size_t duplicate = 0;

  std::size_t total() const { return miss_lead + miss_body + empty + duplicate; }

  double percent(std::size_t count) const {
    return total() == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total());
  }

  ErrorBreakdown& operator+=(const ErrorBreakdown& o) {
    miss_lead += o.miss_lead;
    miss_body += o.miss_body;
    empty += o.empty;
    duplicate += o.duplicate;
    return *this;
  }
};

/// Walks the stream in order. Novelty is judged against nuggets covered by
/// the system's own earlier selections.
inline ErrorBreakdown error_analysis(std::span<const Update> updates, const SentenceStream& stream,
                                     const JudgmentSet& judgments) {
  std::unordered_set<SentenceKey, SentenceKeyHash> selected;
  for (const auto& u : updates) selected.insert(u.key());
  ErrorBreakdown e;
  std::set<std::string> covered;
  for (const auto& s : stream.sentences) {
    const auto& ids = judgments.nuggets_of(s.key());
    bool novel = false;
    for (const auto& id : ids) novel = novel || !covered.count(id);
    if (selected.count(s.key())) {
      if (ids.empty())
        ++e.empty;
      else if (!novel)
        ++e.duplicate;
      covered.insert(ids.begin(), ids.end());
    } else if (novel) {
      ++(s.sent_index == 0 ? e.miss_lead : e.miss_body);
    }
  }
  return e;
}

inline json error_breakdown_to_json(const ErrorBreakdown& e) {
  return json{{"miss_lead", {{"count", e.miss_lead}, {"percent", e.percent(e.miss_lead)}}},
              {"miss_body", {{"count", e.miss_body}, {"percent", e.percent(e.miss_body)}}},
              {"empty", {{"count", e.empty}, {"percent", e.percent(e.empty)}}},
              {"duplicate", {{"count", e.duplicate}, {"percent", e.percent(e.duplicate)}}},
              {"total", e.total()}};
}

// ---------------------------------------------------------------------------
// Manifests

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;
  json config = json::object();
  std::map<std::string, std::string> input_hashes;  // path -> fnv1a hex
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;
};

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Hash of a file, or of every regular file under a directory in path order.
inline std::string hash_input(const std::filesystem::path& path) {
  std::uint64_t h = fnv1a("");
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      h = fnv1a(std::filesystem::relative(f, path).generic_string(), h);
      h = fnv1a(read_file(f), h);
    }
  } else {
    h = fnv1a(read_file(path), h);
  }
  return hex64(h);
}

inline json manifest_to_json(const RunManifest& m) {
  return json{{"command", m.command},       {"config", m.config},
              {"inputs", m.input_hashes},   {"seed", m.seed},
              {"tool_version", m.tool_version}, {"started_at", m.started_at},
              {"finished_at", m.finished_at}, {"outputs", m.outputs}};
}

inline std::filesystem::path manifest_path(const std::filesystem::path& output) {
  return output.string() + ".manifest.json";
}

}  // namespace streamsum

#endif
