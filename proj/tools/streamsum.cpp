// streamsum: command-line front end for filtering, training, running and
// scoring temporal summarization systems.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "streamsum.hpp"

namespace fs = std::filesystem;
using namespace streamsum;

namespace {

struct Settings {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  double window_secs = kDefaultLatencyWindowSecs;

  json raw = json::object();
  FeatureConfig features;
  LolsConfig lols;
  CosConfig cos;
  ApConfig ap;
  FilterConfig filter;
  SyntheticConfig synthetic;

  void load() {
    if (!config_path.empty()) raw = parse_json(read_file(config_path), config_path);
    if (!raw.is_object()) throw ParseError(config_path, "config must be an object");
    static const char* sections[] = {"features", "lols", "cos", "ap", "filter", "synthetic"};
    bool sectioned = false;
    for (const char* s : sections) sectioned = sectioned || raw.contains(s);
    // A flat file holds LolsConfig fields only.
    const json lols_j = sectioned ? raw.value("lols", json::object()) : raw;
    features = feature_config_from_json(raw.value("features", json::object()));
    lols = lols_config_from_json(lols_j);
    cos = cos_config_from_json(raw.value("cos", json::object()));
    ap = ap_config_from_json(raw.value("ap", json::object()));
    const json f = raw.value("filter", json::object());
    filter.max_sentences = optional_field<int>(f, "max_sentences", filter.max_sentences, "filter config");
    filter.dedup_threshold = optional_field<double>(f, "dedup_threshold", filter.dedup_threshold, "filter config");
    synthetic = synthetic_config_from_json(raw.value("synthetic", json::object()));
    if (seed) {
      lols.seed = *seed;
      ap.seed = *seed;
      synthetic.seed = *seed;
    }
    if (!(window_secs > 0.0)) throw ValidationError("--latency-window-secs must be > 0");
  }

  json snapshot() const {
    return json{{"features", feature_config_to_json(features)},
                {"lols", lols_config_to_json(lols)},
                {"cos", cos_config_to_json(cos)},
                {"ap", ap_config_to_json(ap)},
                {"filter", {{"max_sentences", filter.max_sentences}, {"dedup_threshold", filter.dedup_threshold}}},
                {"latency_window_secs", window_secs}};
  }
};

/// Collects inputs and outputs of one command and writes a manifest next to
/// every output.
class ManifestWriter {
 public:
  ManifestWriter(std::string command, const Settings& settings) {
    m_.command = std::move(command);
    m_.config = settings.snapshot();
    m_.seed = settings.lols.seed;
    m_.started_at = utc_now();
  }

  void input(const fs::path& p) {
    if (!p.empty() && fs::exists(p)) m_.input_hashes[p.generic_string()] = hash_input(p);
  }
  void output(const fs::path& p) { m_.outputs.push_back(p.generic_string()); }
  void note(const std::string& key, json value) { m_.config[key] = std::move(value); }

  void finish() {
    m_.finished_at = utc_now();
    const std::string text = manifest_to_json(m_).dump(2) + "\n";
    for (const auto& o : m_.outputs) write_file_atomic(manifest_path(o), text);
  }

 private:
  RunManifest m_;
};

/// Appends lines to a temp file and renames it over the target on commit.
class IncrementalFile {
 public:
  explicit IncrementalFile(fs::path path) : path_(std::move(path)), tmp_(path_) {
    tmp_ += ".tmp";
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw ComputeError("cannot write '" + tmp_.string() + "'");
  }

  void line(const std::string& s) {
    out_ << s << '\n';
    out_.flush();
    if (!out_) throw ComputeError("write failed for '" + tmp_.string() + "'");
  }

  void commit() {
    out_.close();
    fs::rename(tmp_, path_);
  }

 private:
  fs::path path_, tmp_;
  std::ofstream out_;
};

std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string id;
  while (std::getline(in, id, ','))
    if (!id.empty()) out.push_back(id);
  return out;
}

/// Splits events into (training, dev) by the dev id list.
std::pair<std::vector<EventData>, std::vector<EventData>> split_dev(std::vector<EventData> events,
                                                                    const std::vector<std::string>& dev_ids) {
  std::vector<EventData> train, dev;
  for (const auto& id : dev_ids) {
    bool found = false;
    for (const auto& ev : events) found = found || ev.query.id == id;
    if (!found) throw ValidationError("dev query '" + id + "' is not in the query file");
  }
  for (auto& ev : events) {
    bool is_dev = false;
    for (const auto& id : dev_ids) is_dev = is_dev || id == ev.query.id;
    (is_dev ? dev : train).push_back(std::move(ev));
  }
  return {std::move(train), std::move(dev)};
}

const Query& find_query(const std::vector<Query>& queries, const std::string& id) {
  for (const auto& q : queries)
    if (q.id == id) return q;
  throw ValidationError("query '" + id + "' is not in the query file");
}

std::string dump_report(const std::vector<MetricsReport>& reports, double window) {
  return batch_report_json(reports, window).dump(2) + "\n";
}

struct DataPaths {
  std::string queries, streams, judgments, event_lm, general_lm;

  void add_to(CLI::App* cmd, bool judged, bool corpora) {
    cmd->add_option("--queries", queries, "query file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--streams", streams, "directory of <qid>.stream.jsonl files")->required()->check(CLI::ExistingDirectory);
    auto* j = cmd->add_option("--judgments", judgments, "directory of <qid>.nuggets.jsonl / .judgments.jsonl")
                  ->check(CLI::ExistingDirectory);
    if (judged) j->required();
    if (corpora) {
      cmd->add_option("--event-lm", event_lm, "one subdirectory of text per event type")->check(CLI::ExistingDirectory);
      cmd->add_option("--general-lm", general_lm, "directory of general background text")->check(CLI::ExistingDirectory);
    }
  }

  void record(ManifestWriter& m) const {
    for (const auto* p : {&queries, &streams, &judgments, &event_lm, &general_lm}) m.input(*p);
  }
};

// ---------------------------------------------------------------------------

int cmd_synth(const Settings& st, const std::string& out) {
  ManifestWriter m("synth", st);
  m.note("synthetic", synthetic_config_to_json(st.synthetic));
  auto ds = generate_synthetic(st.synthetic);
  write_synthetic(ds, out);
  m.output(fs::path(out) / "queries.json");
  m.finish();
  std::cout << "wrote " << ds.events.size() << " synthetic events to " << out << "\n";
  return 0;
}

int cmd_filter(const Settings& st, const std::string& docs_path, const std::string& queries_path,
               const std::string& query_id, const std::string& out) {
  ManifestWriter m("filter", st);
  m.input(docs_path);
  m.input(queries_path);
  const auto queries = load_queries(queries_path);
  const Query& q = query_id.empty() && queries.size() == 1 ? queries.front() : find_query(queries, query_id);
  const auto sentences = load_sentences(docs_path);
  const auto docs = group_documents(sentences);
  SentenceStream stream;
  if (docs.empty()) {
    stream.query_id = q.id;
  } else {
    std::vector<std::vector<std::string>> corpus;
    for (const auto& d : docs) corpus.push_back(lowercase_all(d.all_tokens()));
    const auto vectorizer = fit_vectorizer(corpus);
    stream = filter_documents(docs, q, vectorizer, st.filter);
  }
  write_file_atomic(out, stream_to_jsonl(stream));
  m.output(out);
  m.finish();
  std::cout << "kept " << stream.size() << " sentences from " << docs.size() << " documents\n";
  return 0;
}

int cmd_train(const Settings& st, const DataPaths& data, const std::string& dev_ids, const std::string& out_model,
              const std::string& diagnostics) {
  ManifestWriter m("train", st);
  data.record(m);
  const auto queries = load_queries(data.queries);
  auto [train, dev] = split_dev(load_events(queries, data.streams, data.judgments), split_ids(dev_ids));
  if (train.empty()) throw ValidationError("train: no training queries left after removing the dev set");
  const auto corpora = load_corpora(data.event_lm, data.general_lm);

  std::optional<IncrementalFile> diag;
  if (!diagnostics.empty()) diag.emplace(diagnostics);
  auto sys = train_system(train, dev, corpora, st.features, st.lols, [&](const IterationRecord& r) {
    if (diag) diag->line(iteration_to_json(r).dump());
  });
  if (diag) {
    diag->line(json{{"selected_snapshot", sys.run.selected}, {"dev_f1", sys.run.dev_f1}}.dump());
    diag->commit();
    m.output(diagnostics);
  }
  write_file_atomic(out_model, bundle_to_json(bundle_from(sys)).dump() + "\n");
  m.output(out_model);
  m.finish();
  std::cout << "trained on " << sys.trained_on.size() << " queries (" << sys.training_streams
            << " streams); selected snapshot " << sys.run.selected << " of " << sys.run.snapshots.size() - 1
            << ", dev F1 " << sys.run.dev_f1[sys.run.selected] << "\n";
  return 0;
}

int cmd_loo(const Settings& st, const DataPaths& data, const std::string& dev_ids, const std::string& report,
            const std::string& updates_out) {
  ManifestWriter m("loo-eval", st);
  data.record(m);
  const auto queries = load_queries(data.queries);
  auto [events, dev] = split_dev(load_events(queries, data.streams, data.judgments), split_ids(dev_ids));
  const auto corpora = load_corpora(data.event_lm, data.general_lm);
  auto res = leave_one_out(events, dev, corpora, st.features, st.lols, st.window_secs);
  auto j = batch_report_json(res.reports, st.window_secs);
  json folds = json::array();
  for (const auto& f : res.folds)
    folds.push_back({{"eval_query", f.eval_query},
                     {"trained_on", f.trained_on},
                     {"selected_snapshot", f.selected_snapshot},
                     {"dev_f1", f.selected_dev_f1}});
  j["folds"] = folds;
  write_file_atomic(report, j.dump(2) + "\n");
  m.output(report);
  if (!updates_out.empty()) {
    std::string text;
    for (const auto& u : res.updates) text += updates_to_jsonl(u);
    write_file_atomic(updates_out, text);
    m.output(updates_out);
  }
  m.finish();
  std::cout << format_report_table(res.reports);
  return 0;
}

RunOptions run_options(const Settings& st, const std::string& system, bool first_only) {
  RunOptions o;
  o.system = parse_system(system);
  o.cos = st.cos;
  o.ap = st.ap;
  o.first_sentences_only = first_only;
  return o;
}

int cmd_run(const Settings& st, const DataPaths& data, const std::string& model, const RunOptions& options,
            const std::string& out) {
  ManifestWriter m("run", st);
  data.record(m);
  m.input(model);
  m.note("system", parse_system_name(options.system));
  m.note("first_sentences_only", options.first_sentences_only);
  const auto bundle = bundle_from_json(parse_json(read_file(model), model));
  const auto queries = load_queries(data.queries);
  if (options.system == SystemKind::Oracle && data.judgments.empty())
    throw ValidationError("run --system oracle needs --judgments");
  IncrementalFile file(out);
  std::size_t total = 0;
  for (const auto& q : queries) {
    const auto ev = load_event(q, data.streams, options.system == SystemKind::Oracle ? data.judgments : "");
    OnlineRunner runner(ev.query, bundle, ev.stream.documents, options,
                        [&](const Update& u) {
                          file.line(update_to_json(u).dump());
                          ++total;
                        },
                        &ev.judgments, ev.nuggets);
    for (const auto& s : ev.stream.sentences) runner.push(s);
    runner.finish();
  }
  file.commit();
  m.output(out);
  m.finish();
  std::cout << "wrote " << total << " updates for " << queries.size() << " queries\n";
  return 0;
}

int cmd_evaluate(const Settings& st, const std::string& updates_path, const std::string& queries_path,
                 const std::string& judgments_dir, const std::string& report) {
  ManifestWriter m("evaluate", st);
  m.input(updates_path);
  m.input(queries_path);
  m.input(judgments_dir);
  const auto queries = load_queries(queries_path);
  const auto by_query = load_updates(updates_path);
  for (const auto& [qid, ups] : by_query) find_query(queries, qid);
  std::vector<MetricsReport> reports;
  for (const auto& q : queries) {
    const auto nuggets = load_nuggets(fs::path(judgments_dir) / (q.id + ".nuggets.jsonl"), q);
    const auto judgments = load_judgments(fs::path(judgments_dir) / (q.id + ".judgments.jsonl"), nuggets);
    auto it = by_query.find(q.id);
    const std::vector<Update> none;
    reports.push_back(evaluate_run(it == by_query.end() ? none : it->second, q, nuggets, judgments, st.window_secs));
  }
  if (!report.empty()) {
    write_file_atomic(report, dump_report(reports, st.window_secs));
    m.output(report);
    m.finish();
  }
  std::cout << format_report_table(reports);
  return 0;
}

int cmd_compare(const Settings& st, const std::vector<std::string>& reports, const std::string& out) {
  ManifestWriter m("compare", st);
  char buf[256];
  std::string table;
  std::snprintf(buf, sizeof buf, "%-28s %8s %8s %8s | %8s %8s %8s | %8s\n", "report", "exp.gain", "comp.", "F1",
                "exp.gain", "comp.", "F1", "updates");
  table += buf;
  json rows = json::array();
  for (const auto& path : reports) {
    m.input(path);
    const auto j = parse_json(read_file(path), path);
    const auto avg = require_field<json>(j, "macro_average", path);
    auto num = [&](const char* k) { return require_field<double>(avg, k, path); };
    std::snprintf(buf, sizeof buf, "%-28.28s %8.3f %8.3f %8.3f | %8.3f %8.3f %8.3f | %8.3f\n",
                  fs::path(path).stem().string().c_str(), num("expected_gain"), num("comprehensiveness"), num("f1"),
                  num("latency_expected_gain"), num("latency_comprehensiveness"), num("latency_f1"),
                  num("num_updates"));
    table += buf;
    rows.push_back({{"report", path}, {"macro_average", avg}});
  }
  if (!out.empty()) {
    write_file_atomic(out, json{{"systems", rows}}.dump(2) + "\n");
    m.output(out);
    m.finish();
  }
  std::cout << table;
  return 0;
}

int cmd_errors(const Settings& st, const DataPaths& data, const std::string& updates_path, const std::string& out) {
  ManifestWriter m("error-analysis", st);
  data.record(m);
  m.input(updates_path);
  const auto queries = load_queries(data.queries);
  const auto by_query = load_updates(updates_path);
  ErrorBreakdown total;
  json per_event = json::array();
  for (const auto& q : queries) {
    const auto ev = load_event(q, data.streams, data.judgments);
    auto it = by_query.find(q.id);
    const std::vector<Update> none;
    const auto e = error_analysis(it == by_query.end() ? none : it->second, ev.stream, ev.judgments);
    auto row = error_breakdown_to_json(e);
    row["query_id"] = q.id;
    per_event.push_back(row);
    total += e;
  }
  const json j{{"events", per_event}, {"total", error_breakdown_to_json(total)}};
  if (!out.empty()) {
    write_file_atomic(out, j.dump(2) + "\n");
    m.output(out);
    m.finish();
  }
  std::printf("%-10s %8s %8s\n", "category", "count", "percent");
  for (const auto& [name, count] : std::vector<std::pair<std::string, std::size_t>>{
           {"miss-lead", total.miss_lead}, {"miss-body", total.miss_body}, {"empty", total.empty},
           {"duplicate", total.duplicate}})
    std::printf("%-10s %8zu %7.1f%%\n", name.c_str(), count, total.percent(count));
  std::printf("%-10s %8zu\n", "total", total.total());
  return 0;
}

int cmd_grid(const Settings& st, const DataPaths& data, const std::string& model, const std::string& system,
             bool first_only, const std::string& out) {
  ManifestWriter m("grid-search", st);
  data.record(m);
  m.input(model);
  const auto bundle = bundle_from_json(parse_json(read_file(model), model));
  const auto events = load_events(load_queries(data.queries), data.streams, data.judgments);
  const auto kind = parse_system(system);
  const auto taus = default_tau_grid();

  auto macro_f1 = [&](const RunOptions& o) {
    std::vector<MetricsReport> reports;
    for (const auto& ev : events)
      reports.push_back(evaluate_run(run_system(ev.stream, ev.query, bundle, o), ev.query, ev.nuggets, ev.judgments,
                                     st.window_secs));
    return macro_average(reports).f1;
  };
  RunOptions base = run_options(st, system, first_only);
  json result;
  if (kind == SystemKind::Cos || kind == SystemKind::LsCos) {
    auto g = grid_search<CosConfig>(cos_grid(taus), [&](const CosConfig& c) {
      RunOptions o = base;
      o.cos = c;
      return macro_f1(o);
    });
    json scores = json::array();
    for (std::size_t i = 0; i < g.candidates.size(); ++i)
      scores.push_back({{"config", cos_config_to_json(g.candidates[i])}, {"f1", g.scores[i]}});
    result = {{"system", system}, {"best", {{"cos", cos_config_to_json(g.best_config())}}}, {"grid", scores}};
  } else if (kind == SystemKind::ApSal) {
    auto g = grid_search<ApConfig>(ap_grid(default_window_grid(), taus, default_offset_grid(), st.ap),
                                   [&](const ApConfig& c) {
                                     RunOptions o = base;
                                     o.ap = c;
                                     return macro_f1(o);
                                   });
    json scores = json::array();
    for (std::size_t i = 0; i < g.candidates.size(); ++i)
      scores.push_back({{"config", ap_config_to_json(g.candidates[i])}, {"f1", g.scores[i]}});
    result = {{"system", system}, {"best", {{"ap", ap_config_to_json(g.best_config())}}}, {"grid", scores}};
  } else {
    throw ValidationError("grid-search supports cos, lscos and apsal");
  }
  write_file_atomic(out, result.dump(2) + "\n");
  m.output(out);
  m.finish();
  std::cout << "best: " << result["best"].dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal summarization: stream filtering, LOLS training, online runs and evaluation"};
  app.require_subcommand(1);
  Settings st;
  app.add_option("--config", st.config_path, "JSON config (sections: features, lols, cos, ap, filter, synthetic)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", st.seed, "overrides every configured seed");
  app.add_option("--latency-window-secs", st.window_secs, "latency discount window W");

  std::string out, model, dev_ids, report, diagnostics, system = "ls", updates, docs, query_id;
  std::vector<std::string> reports;
  bool first_only = false;
  std::optional<double> tau, window, ap_threshold, offset;
  DataPaths data;

  auto* synth = app.add_subcommand("synth", "write a synthetic benchmark");
  synth->add_option("--out", out, "output directory")->required();

  auto* filter = app.add_subcommand("filter", "truncate, keyword-filter and deduplicate raw documents");
  filter->add_option("--docs", docs, "raw document sentences (stream format)")->required()->check(CLI::ExistingFile);
  filter->add_option("--queries", data.queries, "query file")->required()->check(CLI::ExistingFile);
  filter->add_option("--query-id", query_id, "query to filter for (default: the only query)");
  filter->add_option("--out", out, "output stream file")->required();
  std::optional<int> max_sentences;
  std::optional<double> dedup;
  filter->add_option("--max-sentences", max_sentences, "per-document truncation");
  filter->add_option("--dedup-threshold", dedup, "near-duplicate tf-idf cosine threshold");

  auto* train = app.add_subcommand("train", "train a LOLS policy");
  data.add_to(train, true, true);
  train->add_option("--dev-queries", dev_ids, "comma-separated dev query ids for snapshot selection");
  train->add_option("--out-model", model, "trained system bundle")->required();
  train->add_option("--diagnostics", diagnostics, "per-iteration JSONL");

  auto* loo = app.add_subcommand("loo-eval", "leave-one-out evaluation of LOLS");
  data.add_to(loo, true, true);
  loo->add_option("--dev-queries", dev_ids, "comma-separated dev query ids (excluded from folds)");
  loo->add_option("--report", report, "report file")->required();
  loo->add_option("--updates", updates, "held-out updates of every fold");

  auto add_system_flags = [&](CLI::App* cmd) {
    cmd->add_option("--system", system, "ls, lscos, cos, apsal or oracle");
    cmd->add_flag("--first-sentences-only", first_only, "drop non-lead sentences from the stream");
    cmd->add_option("--tau", tau, "cosine threshold for cos and lscos");
    cmd->add_option("--window-secs", window, "APSal window length");
    cmd->add_option("--ap-threshold", ap_threshold, "APSal cross-window cosine threshold");
    cmd->add_option("--preference-offset", offset, "APSal preference offset");
  };

  auto* run = app.add_subcommand("run", "run a system online over query streams");
  data.add_to(run, false, false);
  run->add_option("--model", model, "trained system bundle")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "update file")->required();
  add_system_flags(run);

  auto* evaluate = app.add_subcommand("evaluate", "score an update file");
  evaluate->add_option("--updates", updates, "update file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--queries", data.queries, "query file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--judgments", data.judgments, "judgment directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--report", report, "report file");

  auto* compare = app.add_subcommand("compare", "tabulate macro averages of several reports");
  compare->add_option("reports", reports, "report files")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", out, "combined JSON");

  auto* errors = app.add_subcommand("error-analysis", "break a run's errors into categories");
  data.add_to(errors, true, false);
  errors->add_option("--updates", updates, "update file")->required()->check(CLI::ExistingFile);
  errors->add_option("--out", out, "breakdown JSON");

  auto* grid = app.add_subcommand("grid-search", "tune baseline parameters on dev queries");
  data.add_to(grid, true, false);
  grid->add_option("--model", model, "trained system bundle")->required()->check(CLI::ExistingFile);
  grid->add_option("--out", out, "result JSON")->required();
  add_system_flags(grid);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    st.load();
    if (max_sentences) st.filter.max_sentences = *max_sentences;
    if (dedup) st.filter.dedup_threshold = *dedup;
    if (tau) st.cos.tau = *tau;
    if (window) st.ap.window_secs = *window;
    if (ap_threshold) st.ap.threshold = *ap_threshold;
    if (offset) st.ap.preference_offset = *offset;
    st.cos.validate();
    st.ap.validate();

    if (*synth) return cmd_synth(st, out);
    if (*filter) return cmd_filter(st, docs, data.queries, query_id, out);
    if (*train) return cmd_train(st, data, dev_ids, model, diagnostics);
    if (*loo) return cmd_loo(st, data, dev_ids, report, updates);
    if (*run) return cmd_run(st, data, model, run_options(st, system, first_only), out);
    if (*evaluate) return cmd_evaluate(st, updates, data.queries, data.judgments, report);
    if (*compare) return cmd_compare(st, reports, out);
    if (*errors) return cmd_errors(st, data, updates, out);
    if (*grid) return cmd_grid(st, data, model, system, first_only, out);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
