#ifndef STREAMSUM_CORPUS_HPP
#define STREAMSUM_CORPUS_HPP

// Event queries, sentence streams and relevance judgments: loading,
// validation, document filtering and downsampling.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "streamsum/error.hpp"
#include "streamsum/io.hpp"
#include "streamsum/textrep.hpp"

namespace streamsum {

using Timestamp = std::int64_t;  // epoch seconds

enum class NeTag : std::uint8_t { None = 0, Person, Location, Organization };

inline NeTag parse_ne_tag(const std::string& s) {
  const std::string u = lowercase(s);
  if (u == "none" || u == "o" || u.empty()) return NeTag::None;
  if (u == "person" || u == "per") return NeTag::Person;
  if (u == "location" || u == "loc") return NeTag::Location;
  if (u == "organization" || u == "org") return NeTag::Organization;
  throw ValidationError("unknown named-entity tag '" + s + "'");
}

inline const char* to_string(NeTag t) {
  switch (t) {
    case NeTag::Person: return "PERSON";
    case NeTag::Location: return "LOCATION";
    case NeTag::Organization: return "ORGANIZATION";
    case NeTag::None: break;
  }
  return "NONE";
}

struct SentenceKey {
  std::string doc_id;
  int sent_index = 0;

  auto operator<=>(const SentenceKey&) const = default;
  bool operator==(const SentenceKey&) const = default;
};

struct SentenceKeyHash {
  std::size_t operator()(const SentenceKey& k) const {
    return std::hash<std::string>{}(k.doc_id) * 31u + static_cast<std::size_t>(k.sent_index);
  }
};

struct Sentence {
  std::string doc_id;
  int sent_index = 0;
  Timestamp timestamp = 0;
  std::vector<std::string> tokens;
  std::vector<NeTag> ne_tags;
  std::string raw_text;

  SentenceKey key() const { return {doc_id, sent_index}; }

  void validate(const std::string& where) const {
    if (tokens.empty()) throw ValidationError(where + ": sentence has no tokens");
    if (tokens.size() != ne_tags.size())
      throw ValidationError(where + ": " + std::to_string(tokens.size()) + " tokens but " +
                            std::to_string(ne_tags.size()) + " ne_tags");
    if (sent_index < 0) throw ValidationError(where + ": negative sent_index");
  }
};

/// Stream order: timestamp, then doc_id, then sent_index.
inline bool stream_order(const Sentence& a, const Sentence& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
  return a.sent_index < b.sent_index;
}

struct Document {
  std::string doc_id;
  Timestamp timestamp = 0;
  std::vector<Sentence> sentences;  // ordered by sent_index

  std::vector<std::string> all_tokens() const {
    std::vector<std::string> out;
    for (const auto& s : sentences) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
    return out;
  }

  /// Position of a sentence within this document, or -1.
  int position_of(int sent_index) const {
    for (std::size_t i = 0; i < sentences.size(); ++i)
      if (sentences[i].sent_index == sent_index) return static_cast<int>(i);
    return -1;
  }
};

using DocumentTable = std::unordered_map<std::string, Document>;

/// Groups sentences by document; documents come back in (timestamp, doc_id)
/// order with sentences sorted by sent_index.
inline std::vector<Document> group_documents(std::span<const Sentence> sentences) {
  std::map<std::string, Document> by_id;
  for (const auto& s : sentences) {
    auto& d = by_id[s.doc_id];
    if (d.sentences.empty()) {
      d.doc_id = s.doc_id;
      d.timestamp = s.timestamp;
    } else if (d.timestamp != s.timestamp) {
      throw ValidationError("document '" + s.doc_id + "' has sentences with differing timestamps");
    }
    d.sentences.push_back(s);
  }
  std::vector<Document> docs;
  docs.reserve(by_id.size());
  for (auto& [id, d] : by_id) {
    std::sort(d.sentences.begin(), d.sentences.end(),
              [](const Sentence& a, const Sentence& b) { return a.sent_index < b.sent_index; });
    for (std::size_t i = 1; i < d.sentences.size(); ++i)
      if (d.sentences[i].sent_index == d.sentences[i - 1].sent_index)
        throw ValidationError("document '" + id + "' repeats sent_index " +
                              std::to_string(d.sentences[i].sent_index));
    docs.push_back(std::move(d));
  }
  std::stable_sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.doc_id < b.doc_id;
  });
  return docs;
}

/// A time-ordered sentence stream for one query. `documents` holds the full
/// context of every document the stream draws from; documents arrive
/// atomically, so features of a sentence may use its whole document.
struct SentenceStream {
  std::string query_id;
  std::vector<Sentence> sentences;
  std::shared_ptr<const DocumentTable> documents;

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }

  const Document& document_of(std::size_t i) const {
    auto it = documents->find(sentences.at(i).doc_id);
    if (it == documents->end())
      throw ValidationError("stream '" + query_id + "' has no document '" + sentences[i].doc_id + "'");
    return it->second;
  }

  /// Same document table, sentence subsequence given by sorted indices.
  SentenceStream subsequence(std::span<const std::size_t> indices) const {
    SentenceStream out{query_id, {}, documents};
    out.sentences.reserve(indices.size());
    for (auto i : indices) out.sentences.push_back(sentences.at(i));
    return out;
  }

  SentenceStream prefix(std::size_t t) const {
    SentenceStream out{query_id, {}, documents};
    out.sentences.assign(sentences.begin(), sentences.begin() + static_cast<std::ptrdiff_t>(std::min(t, size())));
    return out;
  }
};

/// Builds a stream whose document table is derived from the sentences.
inline SentenceStream make_stream(std::string query_id, std::vector<Sentence> sentences) {
  std::stable_sort(sentences.begin(), sentences.end(), stream_order);
  auto table = std::make_shared<DocumentTable>();
  for (auto& d : group_documents(sentences)) table->emplace(d.doc_id, std::move(d));
  return {std::move(query_id), std::move(sentences), std::move(table)};
}

inline SentenceStream stream_from_documents(std::string query_id, std::span<const Document> docs) {
  std::vector<Sentence> sentences;
  auto table = std::make_shared<DocumentTable>();
  for (const auto& d : docs) {
    sentences.insert(sentences.end(), d.sentences.begin(), d.sentences.end());
    table->emplace(d.doc_id, d);
  }
  std::stable_sort(sentences.begin(), sentences.end(), stream_order);
  return {std::move(query_id), std::move(sentences), std::move(table)};
}

// ---------------------------------------------------------------------------
// Queries, nuggets, judgments

struct Query {
  std::string id;
  std::string text;
  std::string event_type;
  Timestamp start = 0;
  Timestamp end = 0;
  std::vector<std::string> keywords;
  std::vector<std::string> synonyms;

  bool in_range(Timestamp t) const { return t >= start && t <= end; }
};

struct Nugget {
  std::string id;
  std::string query_id;
  std::string text;
  Timestamp timestamp = 0;
};

/// Lowercases, collapses internal whitespace and drops duplicates while
/// keeping first-occurrence order.
inline std::vector<std::string> normalize_terms(std::span<const std::string> terms) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& raw : terms) {
    std::istringstream in(lowercase(raw));
    std::string word, joined;
    while (in >> word) {
      if (!joined.empty()) joined += ' ';
      joined += word;
    }
    if (joined.empty()) continue;
    if (seen.insert(joined).second) out.push_back(joined);
  }
  return out;
}

inline void validate_query(const Query& q) {
  if (q.id.empty()) throw ValidationError("query: empty id");
  if (q.start >= q.end)
    throw ValidationError("query '" + q.id + "': start (" + std::to_string(q.start) +
                          ") must be before end (" + std::to_string(q.end) + ")");
  if (q.keywords.empty()) throw ValidationError("query '" + q.id + "': no keywords");
}

inline Query query_from_json(const json& j, const std::string& where) {
  Query q;
  q.id = require_field<std::string>(j, "id", where);
  q.text = optional_field<std::string>(j, "text", "", where);
  q.event_type = optional_field<std::string>(j, "event_type", "", where);
  q.start = require_field<Timestamp>(j, "start", where);
  q.end = require_field<Timestamp>(j, "end", where);
  auto kw = require_field<std::vector<std::string>>(j, "keywords", where);
  auto syn = optional_field<std::vector<std::string>>(j, "synonyms", {}, where);
  q.keywords = normalize_terms(kw);
  q.synonyms = normalize_terms(syn);
  validate_query(q);
  return q;
}

inline json query_to_json(const Query& q) {
  return json{{"id", q.id},       {"text", q.text},         {"event_type", q.event_type},
              {"start", q.start}, {"end", q.end},           {"keywords", q.keywords},
              {"synonyms", q.synonyms}};
}

inline Query load_query(const std::filesystem::path& path) {
  return query_from_json(parse_json(read_file(path), path.string()), path.string());
}

/// Accepts a JSON array, a single object or JSON lines. Ids must be unique.
inline std::vector<Query> load_queries(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<Query> out;
  json doc;
  bool whole = true;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    whole = false;
  }
  if (whole && doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i)
      out.push_back(query_from_json(doc[i], path.string() + "[" + std::to_string(i) + "]"));
  } else if (whole) {
    out.push_back(query_from_json(doc, path.string()));
  } else {
    auto rows = read_jsonl(path);
    for (std::size_t i = 0; i < rows.size(); ++i)
      out.push_back(query_from_json(rows[i], path.string() + ":" + std::to_string(i + 1)));
  }
  std::unordered_set<std::string> ids;
  for (const auto& q : out)
    if (!ids.insert(q.id).second) throw ValidationError("duplicate query id '" + q.id + "'");
  return out;
}

inline std::vector<Nugget> load_nuggets(const std::filesystem::path& path, const Query& query) {
  std::vector<Nugget> out;
  std::unordered_set<std::string> ids;
  auto rows = read_jsonl(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    Nugget n;
    n.id = rows[i].contains("nugget_id") ? require_field<std::string>(rows[i], "nugget_id", where)
                                         : require_field<std::string>(rows[i], "id", where);
    n.query_id = optional_field<std::string>(rows[i], "query_id", query.id, where);
    if (n.query_id != query.id) continue;
    n.timestamp = require_field<Timestamp>(rows[i], "timestamp", where);
    n.text = optional_field<std::string>(rows[i], "text", "", where);
    if (n.timestamp > query.end)
      throw ValidationError(where + ": nugget '" + n.id + "' is timestamped after the query ends");
    if (!ids.insert(n.id).second) throw ValidationError(where + ": duplicate nugget id '" + n.id + "'");
    out.push_back(std::move(n));
  }
  return out;
}

inline std::string nuggets_to_jsonl(std::span<const Nugget> nuggets) {
  std::vector<json> rows;
  for (const auto& n : nuggets)
    rows.push_back(json{{"nugget_id", n.id}, {"query_id", n.query_id}, {"timestamp", n.timestamp}, {"text", n.text}});
  return to_jsonl(rows);
}

/// Map from judged sentence to the nuggets it matches. An empty set means the
/// sentence was judged and matches nothing; an absent key also matches
/// nothing.
class JudgmentSet {
 public:
  void add(const SentenceKey& key) { map_[key]; }
  void add(const SentenceKey& key, const std::string& nugget_id) { map_[key].insert(nugget_id); }

  const std::set<std::string>& nuggets_of(const SentenceKey& key) const {
    static const std::set<std::string> none;
    auto it = map_.find(key);
    return it == map_.end() ? none : it->second;
  }

  bool judged(const SentenceKey& key) const { return map_.count(key) > 0; }
  bool matches_any(const SentenceKey& key) const { return !nuggets_of(key).empty(); }
  std::size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }

  const std::unordered_map<SentenceKey, std::set<std::string>, SentenceKeyHash>& entries() const { return map_; }

  /// Throws listing every nugget id not present in `nuggets`.
  void validate(std::span<const Nugget> nuggets) const {
    std::unordered_set<std::string> known;
    for (const auto& n : nuggets) known.insert(n.id);
    std::set<std::string> offenders;
    for (const auto& [key, ids] : map_)
      for (const auto& id : ids)
        if (!known.count(id)) offenders.insert(id);
    if (!offenders.empty()) {
      std::string list;
      for (const auto& o : offenders) list += (list.empty() ? "" : ", ") + o;
      throw ValidationError("judgments cite unknown nugget ids: " + list);
    }
  }

 private:
  std::unordered_map<SentenceKey, std::set<std::string>, SentenceKeyHash> map_;
};

/// Rows are (doc_id, sent_index, nugget_id); a null or empty nugget_id marks a
/// sentence judged as matching nothing.
inline JudgmentSet load_judgments(const std::filesystem::path& path, std::span<const Nugget> nuggets) {
  JudgmentSet out;
  auto rows = read_jsonl(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    SentenceKey key{require_field<std::string>(rows[i], "doc_id", where),
                    require_field<int>(rows[i], "sent_index", where)};
    auto nid = optional_field<std::string>(rows[i], "nugget_id", "", where);
    if (nid.empty())
      out.add(key);
    else
      out.add(key, nid);
  }
  out.validate(nuggets);
  return out;
}

inline std::string judgments_to_jsonl(const JudgmentSet& js) {
  std::vector<std::pair<SentenceKey, std::set<std::string>>> sorted(js.entries().begin(), js.entries().end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<json> rows;
  for (const auto& [key, ids] : sorted) {
    if (ids.empty()) rows.push_back({{"doc_id", key.doc_id}, {"sent_index", key.sent_index}, {"nugget_id", nullptr}});
    for (const auto& id : ids)
      rows.push_back({{"doc_id", key.doc_id}, {"sent_index", key.sent_index}, {"nugget_id", id}});
  }
  return to_jsonl(rows);
}

// ---------------------------------------------------------------------------
// Stream files

inline Sentence sentence_from_json(const json& j, const std::string& where) {
  Sentence s;
  s.doc_id = require_field<std::string>(j, "doc_id", where);
  s.sent_index = require_field<int>(j, "sent_index", where);
  s.timestamp = require_field<Timestamp>(j, "timestamp", where);
  s.tokens = require_field<std::vector<std::string>>(j, "tokens", where);
  for (const auto& tag : require_field<std::vector<std::string>>(j, "ne_tags", where)) {
    try {
      s.ne_tags.push_back(parse_ne_tag(tag));
    } catch (const ValidationError& e) {
      throw ParseError(where, e.what());
    }
  }
  s.raw_text = optional_field<std::string>(j, "raw_text", "", where);
  s.validate(where);
  return s;
}

inline json sentence_to_json(const Sentence& s) {
  std::vector<std::string> tags;
  tags.reserve(s.ne_tags.size());
  for (auto t : s.ne_tags) tags.emplace_back(to_string(t));
  return json{{"doc_id", s.doc_id}, {"sent_index", s.sent_index}, {"timestamp", s.timestamp},
              {"tokens", s.tokens}, {"ne_tags", tags},            {"raw_text", s.raw_text}};
}

inline std::vector<Sentence> load_sentences(const std::filesystem::path& path) {
  std::vector<Sentence> out;
  auto rows = read_jsonl(path);
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.push_back(sentence_from_json(rows[i], path.string() + ":" + std::to_string(i + 1)));
  return out;
}

inline void validate_stream(const SentenceStream& stream, const Query& query) {
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& s = stream.sentences[i];
    if (!query.in_range(s.timestamp))
      throw ValidationError("stream '" + stream.query_id + "': sentence " + s.doc_id + "#" +
                            std::to_string(s.sent_index) + " lies outside the query time range");
    if (i > 0 && s.timestamp < stream.sentences[i - 1].timestamp)
      throw ValidationError("stream '" + stream.query_id + "': timestamps decrease at position " +
                            std::to_string(i));
  }
}

inline SentenceStream load_stream(const std::filesystem::path& path, const Query& query) {
  auto stream = make_stream(query.id, load_sentences(path));
  validate_stream(stream, query);
  return stream;
}

inline std::string stream_to_jsonl(const SentenceStream& stream) {
  std::vector<json> rows;
  rows.reserve(stream.size());
  for (const auto& s : stream.sentences) rows.push_back(sentence_to_json(s));
  return to_jsonl(rows);
}

// ---------------------------------------------------------------------------
// Filtering and downsampling

struct FilterConfig {
  int max_sentences = 20;
  double dedup_threshold = 0.8;
};

inline bool contains_all_keywords(const Document& doc, std::span<const std::string> keywords) {
  std::unordered_set<std::string> present;
  for (const auto& s : doc.sentences)
    for (const auto& t : s.tokens) present.insert(lowercase(t));
  for (const auto& kw : keywords) {
    std::istringstream in(kw);
    std::string part;
    while (in >> part)
      if (!present.count(part)) return false;
  }
  return true;
}

/// Truncates each document, drops documents outside the query time range or
/// lacking any keyword, then drops documents whose tf-idf cosine to any
/// previously retained document exceeds the threshold.
inline SentenceStream filter_documents(std::span<const Document> docs, const Query& query,
                                       const Vectorizer& vectorizer, const FilterConfig& config = {}) {
  for (std::size_t i = 1; i < docs.size(); ++i)
    if (docs[i].timestamp < docs[i - 1].timestamp)
      throw ValidationError("filter_documents: documents are not time-ordered at '" + docs[i].doc_id + "'");

  std::vector<Document> kept;
  std::vector<SparseVector> kept_vectors;
  for (const auto& original : docs) {
    if (!query.in_range(original.timestamp)) continue;
    Document doc = original;
    std::erase_if(doc.sentences, [&](const Sentence& s) { return s.sent_index >= config.max_sentences; });
    if (doc.sentences.empty()) continue;
    if (!contains_all_keywords(doc, query.keywords)) continue;
    SparseVector v = vectorizer.transform(doc.all_tokens());
    bool duplicate = false;
    for (const auto& prev : kept_vectors) {
      if (cosine(v, prev) > config.dedup_threshold) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    kept_vectors.push_back(std::move(v));
    kept.push_back(std::move(doc));
  }
  return stream_from_documents(query.id, kept);
}

struct DownsampleResult {
  SentenceStream stream;
  bool short_stream = false;  // input had fewer than n sentences
  int draws = 0;
};

/// Uniform sample of n sentences kept in stream order; redraws (up to 1000
/// times) until the sample holds at least one nugget-matching sentence.
inline DownsampleResult downsample(const SentenceStream& stream, std::size_t n, const JudgmentSet& judgments,
                                   std::uint64_t seed) {
  if (n < 1) throw ValidationError("downsample: n must be >= 1");
  if (stream.size() <= n) return {stream, stream.size() < n, 0};

  std::vector<char> matches(stream.size());
  bool any = false;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    matches[i] = judgments.matches_any(stream.sentences[i].key());
    any = any || matches[i];
  }
  if (!any) throw ValidationError("downsample: stream '" + stream.query_id + "' has no nugget-matching sentence");

  constexpr int kMaxDraws = 1000;
  std::vector<std::size_t> idx(stream.size());
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(draw)};
    std::mt19937_64 rng(seq);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(chosen.begin(), chosen.end());
    if (std::any_of(chosen.begin(), chosen.end(), [&](std::size_t i) { return matches[i] != 0; }))
      return {stream.subsequence(chosen), false, draw + 1};
  }
  throw ComputeError("downsample: no nugget-bearing sample after 1000 draws");
}

}  // namespace streamsum

#endif
