#ifndef STREAMSUM_RESOURCES_HPP
#define STREAMSUM_RESOURCES_HPP

// Fitting and persisting the shared feature resources: vectorizer, latent
// projector, language models, content classifier and df statistics.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "streamsum/corpus.hpp"
#include "streamsum/features.hpp"
#include "streamsum/io.hpp"
#include "streamsum/textrep.hpp"

namespace streamsum {

/// One judged event: query, gold nuggets, judgments and its filtered stream.
struct EventData {
  Query query;
  std::vector<Nugget> nuggets;
  JudgmentSet judgments;
  SentenceStream stream;
};

/// Background text for the language models and the text space.
struct TextCorpora {
  std::map<std::string, std::vector<std::vector<std::string>>> event_type;  // event type -> sentences
  std::vector<std::vector<std::string>> general;
};

inline std::vector<std::string> whitespace_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string w;
  while (in >> w) out.push_back(lowercase(w));
  return out;
}

/// Plain-text files, one sentence per line, read in file-name order.
inline std::vector<std::vector<std::string>> load_text_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::vector<std::string>> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    while (std::getline(in, line)) {
      auto toks = whitespace_tokens(line);
      if (!toks.empty()) out.push_back(std::move(toks));
    }
  }
  return out;
}

/// Event-type corpora live in one subdirectory per event type.
inline std::map<std::string, std::vector<std::vector<std::string>>> load_event_corpora(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("'" + dir.string() + "' is not a directory");
  std::map<std::string, std::vector<std::vector<std::string>>> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_directory()) out[e.path().filename().string()] = load_text_corpus(e.path());
  return out;
}

/// Dataset layout shared by the tools:
///   <streams>/<qid>.stream.jsonl
///   <judgments>/<qid>.nuggets.jsonl, <judgments>/<qid>.judgments.jsonl
/// An empty judgments path loads the event unjudged.
inline EventData load_event(const Query& query, const std::filesystem::path& streams,
                            const std::filesystem::path& judgments = {}) {
  EventData ev;
  ev.query = query;
  ev.stream = load_stream(streams / (query.id + ".stream.jsonl"), query);
  if (!judgments.empty()) {
    ev.nuggets = load_nuggets(judgments / (query.id + ".nuggets.jsonl"), query);
    ev.judgments = load_judgments(judgments / (query.id + ".judgments.jsonl"), ev.nuggets);
  }
  return ev;
}

inline std::vector<EventData> load_events(std::span<const Query> queries, const std::filesystem::path& streams,
                                          const std::filesystem::path& judgments = {}) {
  std::vector<EventData> out;
  for (const auto& q : queries) out.push_back(load_event(q, streams, judgments));
  return out;
}

/// Either directory may be empty (no background text of that kind).
inline TextCorpora load_corpora(const std::filesystem::path& event_lm, const std::filesystem::path& general_lm) {
  TextCorpora c;
  if (!event_lm.empty()) c.event_type = load_event_corpora(event_lm);
  if (!general_lm.empty()) c.general = load_text_corpus(general_lm);
  return c;
}

inline LanguageModel fit_language_model(std::span<const std::vector<std::string>> sentences, double alpha,
                                        LanguageModel::Domain domain) {
  LanguageModel lm(alpha, domain);
  for (const auto& s : sentences) lm.add(s);
  return lm;
}

/// Judged sentences of the training streams: positive iff matching a nugget.
inline std::vector<LabeledSentence> content_training_data(std::span<const EventData> events) {
  std::vector<LabeledSentence> out;
  for (const auto& ev : events)
    for (const auto& s : ev.stream.sentences)
      if (ev.judgments.judged(s.key())) out.push_back({s.tokens, ev.judgments.matches_any(s.key())});
  return out;
}

/// Fits everything except the scaler. Only training-event text (plus the
/// background corpora) is seen.
inline Resources build_resources(std::span<const EventData> training, const TextCorpora& corpora,
                                 const FeatureConfig& config) {
  Resources res;
  res.config = config;
  std::vector<std::vector<std::string>> text;
  for (const auto& s : corpora.general) text.push_back(s);
  for (const auto& [type, sents] : corpora.event_type)
    for (const auto& s : sents) text.push_back(s);
  for (const auto& ev : training)
    for (const auto& s : ev.stream.sentences) text.push_back(lowercase_all(s.tokens));
  if (text.empty()) throw ValidationError("build_resources: no text to fit the vectorizer on");
  res.vectorizer = fit_vectorizer(text);
  const int k = std::max(1, static_cast<int>(std::min<std::size_t>(
                                {static_cast<std::size_t>(config.latent_k), res.vectorizer.vocabulary_size(),
                                 text.size()})));
  res.projector = fit_latent(res.vectorizer, text, k);
  res.config.latent_k = k;
  for (const auto& [type, sents] : corpora.event_type)
    res.event_lms.emplace(type, fit_language_model(sents, config.lm_alpha, LanguageModel::Domain::EventType));
  res.general_lm = fit_language_model(corpora.general, config.lm_alpha, LanguageModel::Domain::General);

  auto labeled = content_training_data(training);
  if (!labeled.empty()) res.classifier = train_content_classifier(labeled, config.tree);

  std::vector<SentenceStream> streams;
  for (const auto& ev : training) streams.push_back(ev.stream);
  res.stream_stats = fit_stream_stats(streams);
  return res;
}

// ---------------------------------------------------------------------------
// Serialization

inline json lm_to_json(const LanguageModel& lm) {
  std::map<std::string, double> sorted(lm.counts().begin(), lm.counts().end());
  return json{{"alpha", lm.alpha()}, {"domain", static_cast<int>(lm.domain())}, {"counts", sorted}};
}

inline LanguageModel lm_from_json(const json& j, std::shared_ptr<const StopwordSet> stop) {
  const std::string where = "language model";
  LanguageModel lm(require_field<double>(j, "alpha", where),
                   static_cast<LanguageModel::Domain>(require_field<int>(j, "domain", where)), std::move(stop));
  for (const auto& [w, c] : require_field<std::map<std::string, double>>(j, "counts", where)) lm.add_count(w, c);
  return lm;
}

inline json classifier_to_json(const ContentClassifier& c) {
  json nodes = json::array();
  for (const auto& n : c.nodes())
    nodes.push_back({{"ngram", n.ngram},
                     {"absent", n.absent},
                     {"present", n.present},
                     {"probability", n.probability},
                     {"positives", n.positives},
                     {"samples", n.samples}});
  return json{{"version", 1},
              {"max_depth", c.config().max_depth},
              {"min_leaf", c.config().min_leaf},
              {"fingerprint", c.fingerprint()},
              {"nodes", nodes}};
}

inline ContentClassifier classifier_from_json(const json& j) {
  const std::string where = "content classifier";
  if (require_field<int>(j, "version", where) != 1) throw ParseError(where, "unsupported version");
  std::vector<ContentClassifier::Node> nodes;
  for (const auto& n : require_field<json>(j, "nodes", where)) {
    ContentClassifier::Node node;
    node.ngram = require_field<std::string>(n, "ngram", where);
    node.absent = require_field<int>(n, "absent", where);
    node.present = require_field<int>(n, "present", where);
    node.probability = require_field<double>(n, "probability", where);
    node.positives = optional_field<int>(n, "positives", 0, where);
    node.samples = optional_field<int>(n, "samples", 0, where);
    nodes.push_back(std::move(node));
  }
  TreeConfig cfg{require_field<int>(j, "max_depth", where), require_field<int>(j, "min_leaf", where)};
  return ContentClassifier::from_nodes(std::move(nodes), cfg, optional_field<std::string>(j, "fingerprint", "", where));
}

inline json feature_config_to_json(const FeatureConfig& c) {
  return json{{"lexrank_threshold", c.lexrank_threshold}, {"lexrank_damping", c.lexrank_damping},
              {"novelty_eps", c.novelty_eps},             {"lm_alpha", c.lm_alpha},
              {"latent_k", c.latent_k},                   {"tree_max_depth", c.tree.max_depth},
              {"tree_min_leaf", c.tree.min_leaf}};
}

inline FeatureConfig feature_config_from_json(const json& j, FeatureConfig c = {}) {
  const std::string where = "feature config";
  c.lexrank_threshold = optional_field<double>(j, "lexrank_threshold", c.lexrank_threshold, where);
  c.lexrank_damping = optional_field<double>(j, "lexrank_damping", c.lexrank_damping, where);
  c.novelty_eps = optional_field<double>(j, "novelty_eps", c.novelty_eps, where);
  c.lm_alpha = optional_field<double>(j, "lm_alpha", c.lm_alpha, where);
  c.latent_k = optional_field<int>(j, "latent_k", c.latent_k, where);
  c.tree.max_depth = optional_field<int>(j, "tree_max_depth", c.tree.max_depth, where);
  c.tree.min_leaf = optional_field<int>(j, "tree_min_leaf", c.tree.min_leaf, where);
  return c;
}

inline constexpr int kResourcesFormatVersion = 1;

inline json resources_to_json(const Resources& r) {
  std::vector<std::string> stop(r.vectorizer.stopwords().begin(), r.vectorizer.stopwords().end());
  std::sort(stop.begin(), stop.end());
  const auto& p = r.projector.matrix();
  std::vector<double> proj(p.data(), p.data() + p.size());
  json event_lms = json::object();
  for (const auto& [type, lm] : r.event_lms) event_lms[type] = lm_to_json(lm);
  json stats{{"mean", r.stream_stats.mean}, {"variance", r.stream_stats.variance}, {"count", r.stream_stats.count}};
  return json{{"format", "streamsum-resources"},
              {"version", kResourcesFormatVersion},
              {"config", feature_config_to_json(r.config)},
              {"vectorizer",
               {{"terms", r.vectorizer.terms()},
                {"idf", r.vectorizer.idf()},
                {"stopwords", stop},
                {"num_documents", r.vectorizer.num_documents()}}},
              {"projector", {{"rows", p.rows()}, {"cols", p.cols()}, {"column_major", proj}}},
              {"event_lms", event_lms},
              {"general_lm", lm_to_json(r.general_lm)},
              {"classifier", classifier_to_json(r.classifier)},
              {"stream_stats", stats},
              {"scaler", {{"mean", r.scaler.mean}, {"inv_sd", r.scaler.inv_sd}, {"clip", r.scaler.clip}, {"gain", r.scaler.gain}}}};
}

inline Resources resources_from_json(const json& j) {
  const std::string where = "resources";
  if (optional_field<std::string>(j, "format", "", where) != "streamsum-resources")
    throw ParseError(where, "not a resources bundle");
  if (require_field<int>(j, "version", where) != kResourcesFormatVersion)
    throw ParseError(where, "unsupported format version");
  Resources r;
  r.config = feature_config_from_json(require_field<json>(j, "config", where));
  const auto& v = require_field<json>(j, "vectorizer", where);
  auto stop_list = require_field<std::vector<std::string>>(v, "stopwords", where);
  auto stop = std::make_shared<const StopwordSet>(stop_list.begin(), stop_list.end());
  r.vectorizer = Vectorizer::from_parts(require_field<std::vector<std::string>>(v, "terms", where),
                                        require_field<std::vector<double>>(v, "idf", where), stop,
                                        require_field<std::size_t>(v, "num_documents", where));
  const auto& pj = require_field<json>(j, "projector", where);
  const auto rows = require_field<Eigen::Index>(pj, "rows", where);
  const auto cols = require_field<Eigen::Index>(pj, "cols", where);
  auto data = require_field<std::vector<double>>(pj, "column_major", where);
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError(where, "projector size mismatch");
  r.projector = LatentProjector::from_matrix(Eigen::Map<Eigen::MatrixXd>(data.data(), rows, cols));
  const auto event_lms = require_field<json>(j, "event_lms", where);
  for (const auto& [type, lj] : event_lms.items())
    r.event_lms.emplace(type, lm_from_json(lj, stop));
  r.general_lm = lm_from_json(require_field<json>(j, "general_lm", where), stop);
  r.classifier = classifier_from_json(require_field<json>(j, "classifier", where));
  const auto& st = require_field<json>(j, "stream_stats", where);
  r.stream_stats.mean = require_field<std::array<double, 24>>(st, "mean", where);
  r.stream_stats.variance = require_field<std::array<double, 24>>(st, "variance", where);
  r.stream_stats.count = require_field<std::array<std::size_t, 24>>(st, "count", where);
  const auto& sc = require_field<json>(j, "scaler", where);
  r.scaler.mean = require_field<std::vector<double>>(sc, "mean", where);
  r.scaler.inv_sd = require_field<std::vector<double>>(sc, "inv_sd", where);
  r.scaler.clip = require_field<double>(sc, "clip", where);
  r.scaler.gain = require_field<double>(sc, "gain", where);
  if (r.scaler.mean.size() != r.scaler.inv_sd.size()) throw ParseError(where, "scaler size mismatch");
  return r;
}

}  // namespace streamsum

#endif
