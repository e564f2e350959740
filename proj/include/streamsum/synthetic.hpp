#ifndef STREAMSUM_SYNTHETIC_HPP
#define STREAMSUM_SYNTHETIC_HPP

// Synthetic judged event streams for benchmarking and tests.
//
// Each query has a place name, a set of nuggets with private signature words,
// and documents spread over its time range. Nugget sentences repeat across
// documents, carry event-type salient words and sometimes open a document.
// Salient words also leak into background sentences, so every cue is noisy.

#include <algorithm>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "streamsum/corpus.hpp"
#include "streamsum/io.hpp"
#include "streamsum/resources.hpp"

namespace streamsum {

struct SyntheticConfig {
  std::size_t num_queries = 20;
  std::size_t stream_length = 100;
  std::size_t nuggets_per_query = 8;
  std::size_t num_event_types = 4;
  std::size_t salient_per_type = 12;
  std::size_t filler_vocabulary = 300;
  int min_doc_sentences = 3;
  int max_doc_sentences = 8;
  int min_mentions = 2;
  int max_mentions = 3;
  int signature_per_mention = 3;  // of the nugget's 3 signature words
  int min_salient = 1;  // salient words per nugget sentence
  int max_salient = 3;
  double lead_probability = 0.35;
  double noise_salient_probability = 0.25;
  double keyword_in_nugget = 0.7;
  std::size_t event_corpus_sentences = 300;
  std::size_t general_filler_sentences = 600;
  Timestamp origin = 1400000000;
  double duration_hours = 48.0;
  std::uint64_t seed = 7;
};

inline json synthetic_config_to_json(const SyntheticConfig& c) {
  return json{{"num_queries", c.num_queries},
              {"stream_length", c.stream_length},
              {"nuggets_per_query", c.nuggets_per_query},
              {"num_event_types", c.num_event_types},
              {"salient_per_type", c.salient_per_type},
              {"filler_vocabulary", c.filler_vocabulary},
              {"min_doc_sentences", c.min_doc_sentences},
              {"max_doc_sentences", c.max_doc_sentences},
              {"min_mentions", c.min_mentions},
              {"max_mentions", c.max_mentions},
              {"signature_per_mention", c.signature_per_mention},
              {"min_salient", c.min_salient},
              {"max_salient", c.max_salient},
              {"lead_probability", c.lead_probability},
              {"noise_salient_probability", c.noise_salient_probability},
              {"keyword_in_nugget", c.keyword_in_nugget},
              {"event_corpus_sentences", c.event_corpus_sentences},
              {"general_filler_sentences", c.general_filler_sentences},
              {"origin", c.origin},
              {"duration_hours", c.duration_hours},
              {"seed", c.seed}};
}

inline SyntheticConfig synthetic_config_from_json(const json& j, SyntheticConfig c = {}) {
  const std::string where = "synthetic config";
  c.num_queries = optional_field<std::size_t>(j, "num_queries", c.num_queries, where);
  c.stream_length = optional_field<std::size_t>(j, "stream_length", c.stream_length, where);
  c.nuggets_per_query = optional_field<std::size_t>(j, "nuggets_per_query", c.nuggets_per_query, where);
  c.num_event_types = optional_field<std::size_t>(j, "num_event_types", c.num_event_types, where);
  c.salient_per_type = optional_field<std::size_t>(j, "salient_per_type", c.salient_per_type, where);
  c.filler_vocabulary = optional_field<std::size_t>(j, "filler_vocabulary", c.filler_vocabulary, where);
  c.min_doc_sentences = optional_field<int>(j, "min_doc_sentences", c.min_doc_sentences, where);
  c.max_doc_sentences = optional_field<int>(j, "max_doc_sentences", c.max_doc_sentences, where);
  c.min_mentions = optional_field<int>(j, "min_mentions", c.min_mentions, where);
  c.max_mentions = optional_field<int>(j, "max_mentions", c.max_mentions, where);
  c.signature_per_mention = optional_field<int>(j, "signature_per_mention", c.signature_per_mention, where);
  c.min_salient = optional_field<int>(j, "min_salient", c.min_salient, where);
  c.max_salient = optional_field<int>(j, "max_salient", c.max_salient, where);
  c.lead_probability = optional_field<double>(j, "lead_probability", c.lead_probability, where);
  c.noise_salient_probability = optional_field<double>(j, "noise_salient_probability", c.noise_salient_probability, where);
  c.keyword_in_nugget = optional_field<double>(j, "keyword_in_nugget", c.keyword_in_nugget, where);
  c.event_corpus_sentences = optional_field<std::size_t>(j, "event_corpus_sentences", c.event_corpus_sentences, where);
  c.general_filler_sentences = optional_field<std::size_t>(j, "general_filler_sentences", c.general_filler_sentences, where);
  c.origin = optional_field<Timestamp>(j, "origin", c.origin, where);
  c.duration_hours = optional_field<double>(j, "duration_hours", c.duration_hours, where);
  c.seed = optional_field<std::uint64_t>(j, "seed", c.seed, where);
  return c;
}

struct SyntheticDataset {
  std::vector<EventData> events;
  TextCorpora corpora;
};

namespace synth_detail {

inline std::string pseudo_word(std::size_t index) {
  static const char* syllables[] = {"ba", "ke", "lo", "mi", "nu", "ra", "si", "to", "vu", "ze",
                                    "da", "fe", "go", "hi", "ju", "pa", "qe", "ro", "ti", "wo"};
  std::string w;
  for (int i = 0; i < 3; ++i) {
    w += syllables[index % 20];
    index /= 20;
  }
  while (index > 0) {
    w += syllables[index % 20];
    index /= 20;
  }
  return w;
}

inline const std::vector<std::string>& event_type_names() {
  static const std::vector<std::string> names{"earthquake", "storm", "shooting", "protest",
                                              "flood",      "fire",  "accident", "outbreak"};
  return names;
}

struct Vocab {
  const SyntheticConfig& c;
  std::string filler(std::size_t i) const { return pseudo_word(i); }
  std::string salient(std::size_t type, std::size_t i) const { return pseudo_word(1000 + type * 50 + i); }
  std::string signature(std::size_t q, std::size_t j, std::size_t k) const {
    return pseudo_word(2000 + q * 40 + j * 4 + k);
  }
  std::string place(std::size_t q) const { return pseudo_word(5000 + q); }
  std::string person(std::size_t q, std::size_t i) const { return pseudo_word(5500 + q * 4 + i); }
};

inline const std::vector<std::string>& glue_words() {
  static const std::vector<std::string> g{"the", "of", "in", "and", "to", "a", "on", "was"};
  return g;
}

}  // namespace synth_detail

inline SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  using namespace synth_detail;
  if (config.num_event_types < 1 || config.num_event_types > event_type_names().size())
    throw ValidationError("synthetic: num_event_types must lie in [1, 8]");
  if (config.nuggets_per_query < 1 || config.nuggets_per_query > 10)
    throw ValidationError("synthetic: nuggets_per_query must lie in [1, 10]");
  if (config.stream_length < config.nuggets_per_query)
    throw ValidationError("synthetic: stream too short for its nuggets");
  if (config.min_doc_sentences < 1 || config.max_doc_sentences < config.min_doc_sentences)
    throw ValidationError("synthetic: bad document size range");
  if (config.signature_per_mention < 1 || config.signature_per_mention > 3)
    throw ValidationError("synthetic: signature_per_mention must lie in [1, 3]");
  if (config.min_salient < 0 || config.max_salient < config.min_salient)
    throw ValidationError("synthetic: bad salient-word range");
  if (config.min_mentions < 1 || config.max_mentions < config.min_mentions)
    throw ValidationError("synthetic: bad mention range");

  const Vocab vocab{config};
  SyntheticDataset ds;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto coin = [&](double p) { return unit(rng) < p; };
  auto uniform = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  // Zipf-like filler draw: low indices are frequent.
  auto filler = [&]() {
    const double u = unit(rng);
    return vocab.filler(static_cast<std::size_t>(u * u * static_cast<double>(config.filler_vocabulary)) %
                        config.filler_vocabulary);
  };
  auto add_fillers = [&](std::vector<std::string>& toks, std::size_t lo, std::size_t hi) {
    const auto n = uniform(lo, hi);
    for (std::size_t i = 0; i < n; ++i) toks.push_back(coin(0.3) ? glue_words()[uniform(0, 7)] : filler());
  };

  const auto span_secs = static_cast<Timestamp>(config.duration_hours * 3600.0);

  for (std::size_t q = 0; q < config.num_queries; ++q) {
    const std::size_t type = q % config.num_event_types;
    EventData ev;
    char qid[16];
    std::snprintf(qid, sizeof qid, "q%02zu", q + 1);
    ev.query.id = qid;
    ev.query.event_type = event_type_names()[type];
    ev.query.text = vocab.place(q) + " " + ev.query.event_type;
    ev.query.start = config.origin + static_cast<Timestamp>(q) * 86400;
    ev.query.end = ev.query.start + span_secs;
    ev.query.keywords = {vocab.place(q)};
    ev.query.synonyms = {vocab.salient(type, 0)};

    // Document sizes summing to the stream length.
    std::vector<int> sizes;
    std::size_t total = 0;
    while (total < config.stream_length) {
      int sz = static_cast<int>(uniform(static_cast<std::size_t>(config.min_doc_sentences),
                                        static_cast<std::size_t>(config.max_doc_sentences)));
      sz = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(sz), config.stream_length - total));
      sizes.push_back(sz);
      total += static_cast<std::size_t>(sz);
    }
    const std::size_t D = sizes.size();
    std::vector<Timestamp> times(D);
    for (auto& t : times)
      t = ev.query.start + 3600 + static_cast<Timestamp>(unit(rng) * 0.9 * static_cast<double>(span_secs - 3600));
    std::sort(times.begin(), times.end());

    // slot[d][p] = nugget index or -1.
    std::vector<std::vector<int>> slot(D);
    for (std::size_t d = 0; d < D; ++d) slot[d].assign(static_cast<std::size_t>(sizes[d]), -1);
    auto free_slot = [&](std::size_t d, bool lead) -> int {
      std::vector<int> frees;
      for (int p = lead ? 0 : 1; p < sizes[d]; ++p)
        if (slot[d][static_cast<std::size_t>(p)] < 0) frees.push_back(p);
      if (lead) return slot[d][0] < 0 ? 0 : -1;
      if (frees.empty()) return slot[d][0] < 0 ? 0 : -1;
      return frees[uniform(0, frees.size() - 1)];
    };
    auto place_mention = [&](std::size_t d, int j) {
      const int p = free_slot(d, coin(config.lead_probability));
      const int fallback = p >= 0 ? p : free_slot(d, false);
      if (fallback < 0) return false;
      slot[d][static_cast<std::size_t>(fallback)] = j;
      return true;
    };

    const std::size_t last_origin = std::max<std::size_t>(1, D * 7 / 10);
    for (std::size_t j = 0; j < config.nuggets_per_query; ++j) {
      std::size_t origin = uniform(0, last_origin - 1);
      while (!place_mention(origin, static_cast<int>(j))) origin = (origin + 1) % D;
      Nugget n;
      n.id = ev.query.id + "-n" + std::to_string(j + 1);
      n.query_id = ev.query.id;
      n.timestamp = std::max(ev.query.start, times[origin] - static_cast<Timestamp>(unit(rng) * 3.0 * 3600.0));
      n.text = vocab.signature(q, j, 0) + " " + vocab.signature(q, j, 1) + " " + vocab.signature(q, j, 2);
      ev.nuggets.push_back(n);
      const auto extra = uniform(static_cast<std::size_t>(config.min_mentions), static_cast<std::size_t>(config.max_mentions)) - 1;
      for (std::size_t m = 0; m < extra && origin + 1 < D; ++m) place_mention(uniform(origin + 1, D - 1), static_cast<int>(j));
    }

    std::vector<Sentence> sentences;
    for (std::size_t d = 0; d < D; ++d) {
      char did[32];
      std::snprintf(did, sizeof did, "%s-d%03zu", ev.query.id.c_str(), d);
      for (int p = 0; p < sizes[d]; ++p) {
        std::vector<std::string> toks;
        const int j = slot[d][static_cast<std::size_t>(p)];
        if (j >= 0) {
          std::vector<std::size_t> sig{0, 1, 2};
          std::shuffle(sig.begin(), sig.end(), rng);
          for (int k = 0; k < config.signature_per_mention; ++k)
            toks.push_back(vocab.signature(q, static_cast<std::size_t>(j), sig[static_cast<std::size_t>(k)]));
          const auto ns = uniform(static_cast<std::size_t>(config.min_salient), static_cast<std::size_t>(config.max_salient));
          for (std::size_t k = 0; k < ns; ++k) toks.push_back(vocab.salient(type, uniform(0, config.salient_per_type - 1)));
          if (coin(config.keyword_in_nugget)) toks.push_back(vocab.place(q));
          if (coin(0.5)) toks.push_back(vocab.person(q, uniform(0, 3)));
          add_fillers(toks, 3, 7);
        } else {
          if (coin(0.3)) toks.push_back(vocab.place(q));
          if (coin(config.noise_salient_probability))
            toks.push_back(vocab.salient(type, uniform(0, config.salient_per_type - 1)));
          if (coin(0.2)) toks.push_back(vocab.person(q, uniform(0, 3)));
          add_fillers(toks, 5, 10);
        }
        std::shuffle(toks.begin(), toks.end(), rng);
        if (p == 0 && std::find(toks.begin(), toks.end(), vocab.place(q)) == toks.end())
          toks.insert(toks.begin(), vocab.place(q));
        Sentence s;
        s.doc_id = did;
        s.sent_index = p;
        s.timestamp = times[d];
        s.tokens = toks;
        for (const auto& t : toks) {
          bool person = false;
          for (std::size_t i = 0; i < 4; ++i) person = person || t == vocab.person(q, i);
          s.ne_tags.push_back(t == vocab.place(q) ? NeTag::Location : person ? NeTag::Person : NeTag::None);
        }
        for (const auto& t : toks) s.raw_text += (s.raw_text.empty() ? "" : " ") + t;
        if (j >= 0)
          ev.judgments.add(s.key(), ev.nuggets[static_cast<std::size_t>(j)].id);
        else
          ev.judgments.add(s.key());
        sentences.push_back(std::move(s));
      }
    }
    ev.stream = make_stream(ev.query.id, std::move(sentences));
    ds.events.push_back(std::move(ev));
  }

  // Background corpora.
  for (std::size_t type = 0; type < config.num_event_types; ++type) {
    auto& sents = ds.corpora.event_type[event_type_names()[type]];
    for (std::size_t i = 0; i < config.event_corpus_sentences; ++i) {
      std::vector<std::string> toks;
      const auto ns = uniform(1, 3);
      for (std::size_t k = 0; k < ns; ++k) toks.push_back(vocab.salient(type, uniform(0, config.salient_per_type - 1)));
      add_fillers(toks, 5, 8);
      std::shuffle(toks.begin(), toks.end(), rng);
      sents.push_back(std::move(toks));
    }
  }
  for (std::size_t q = 0; q < config.num_queries; ++q) {
    for (std::size_t j = 0; j < config.nuggets_per_query; ++j) {
      for (int rep = 0; rep < 3; ++rep) {
        std::vector<std::string> toks{vocab.signature(q, j, 0), vocab.signature(q, j, 1), vocab.signature(q, j, 2)};
        add_fillers(toks, 3, 6);
        std::shuffle(toks.begin(), toks.end(), rng);
        ds.corpora.general.push_back(std::move(toks));
      }
    }
    for (int rep = 0; rep < 3; ++rep) {
      std::vector<std::string> toks{vocab.place(q), vocab.person(q, static_cast<std::size_t>(rep))};
      add_fillers(toks, 4, 8);
      ds.corpora.general.push_back(std::move(toks));
    }
  }
  for (std::size_t i = 0; i < config.general_filler_sentences; ++i) {
    std::vector<std::string> toks;
    add_fillers(toks, 6, 12);
    if (coin(0.1)) toks.push_back(vocab.salient(uniform(0, config.num_event_types - 1), uniform(0, config.salient_per_type - 1)));
    ds.corpora.general.push_back(std::move(toks));
  }
  return ds;
}

inline std::string join_tokens(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) out += (out.empty() ? "" : " ") + t;
  return out;
}

/// Layout:
///   queries.json
///   streams/<qid>.stream.jsonl
///   judgments/<qid>.nuggets.jsonl, judgments/<qid>.judgments.jsonl
///   event_lm/<type>/corpus.txt
///   general_lm/corpus.txt
inline void write_synthetic(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "streams");
  fs::create_directories(dir / "judgments");
  fs::create_directories(dir / "general_lm");
  json queries = json::array();
  for (const auto& ev : ds.events) {
    queries.push_back(query_to_json(ev.query));
    write_file_atomic(dir / "streams" / (ev.query.id + ".stream.jsonl"), stream_to_jsonl(ev.stream));
    write_file_atomic(dir / "judgments" / (ev.query.id + ".nuggets.jsonl"), nuggets_to_jsonl(ev.nuggets));
    write_file_atomic(dir / "judgments" / (ev.query.id + ".judgments.jsonl"), judgments_to_jsonl(ev.judgments));
  }
  write_file_atomic(dir / "queries.json", queries.dump(2) + "\n");
  for (const auto& [type, sents] : ds.corpora.event_type) {
    fs::create_directories(dir / "event_lm" / type);
    std::string text;
    for (const auto& s : sents) text += join_tokens(s) + "\n";
    write_file_atomic(dir / "event_lm" / type / "corpus.txt", text);
  }
  std::string general;
  for (const auto& s : ds.corpora.general) general += join_tokens(s) + "\n";
  write_file_atomic(dir / "general_lm" / "corpus.txt", general);
}

}  // namespace streamsum

#endif
