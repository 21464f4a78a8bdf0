#include "alignmap/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "alignmap/diagnosis.hpp"
#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/math.hpp"

namespace alignmap {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void PipelineConfig::finalize() {
  partition.seed = seed;
  selection.seed = seed;
  dynamics.seed = seed;
  dynamics.gamma = gamma_beta_ratio * dynamics.beta;
}

Stage stage_from_string(const std::string& s) {
  if (s == "ingest") return Stage::Ingest;
  if (s == "score") return Stage::Score;
  if (s == "map") return Stage::Map;
  if (s == "diagnose") return Stage::Diagnose;
  if (s == "select") return Stage::Select;
  if (s == "export") return Stage::Export;
  if (s == "simulate") return Stage::Simulate;
  if (s == "plot") return Stage::Plot;
  if (s == "report") return Stage::Report;
  throw ValidationError("unknown stage '" + s + "'");
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::Score: return "score";
    case Stage::Map: return "map";
    case Stage::Diagnose: return "diagnose";
    case Stage::Select: return "select";
    case Stage::Export: return "export";
    case Stage::Simulate: return "simulate";
    case Stage::Plot: return "plot";
    case Stage::Report: return "report";
  }
  return "ingest";
}

namespace {

const json* find_section(const json& j, const char* key) {
  if (!j.contains(key)) return nullptr;
  if (!j[key].is_object()) {
    throw ValidationError(std::string("config: '") + key + "' must be an object");
  }
  return &j[key];
}

std::string str_field(const json& j, const char* key, const std::string& dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_string()) {
    throw ValidationError(std::string("config: '") + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

double num_field(const json& j, const char* key, double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number()) {
    throw ValidationError(std::string("config: '") + key + "' must be a number");
  }
  return j[key].get<double>();
}

std::uint64_t uint_field(const json& j, const char* key, std::uint64_t dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number_unsigned() && !j[key].is_number_integer()) {
    throw ValidationError(std::string("config: '") + key + "' must be an integer");
  }
  const auto v = j[key].get<std::int64_t>();
  if (v < 0) throw ValidationError(std::string("config: '") + key + "' must be >= 0");
  return static_cast<std::uint64_t>(v);
}

bool bool_field(const json& j, const char* key, bool dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_boolean()) {
    throw ValidationError(std::string("config: '") + key + "' must be a boolean");
  }
  return j[key].get<bool>();
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void log_stage(const PipelineConfig& cfg, const std::string& stage,
               const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  ojson entry;
  entry["stage"] = stage;
  ojson in = ojson::object();
  for (const auto& p : inputs) in[p.string()] = file_digest(p);
  entry["inputs"] = std::move(in);
  ojson out = ojson::object();
  for (const auto& p : outputs) out[p.string()] = file_digest(p);
  entry["outputs"] = std::move(out);
  entry["seed"] = cfg.seed;
  entry["timestamp"] = utc_timestamp();
  std::ofstream log(cfg.outdir / "run_log.jsonl", std::ios::app);
  log << entry.dump() << '\n';
}

fs::path require_artifact(const PipelineConfig& cfg, const char* name, const char* producer) {
  fs::path p = cfg.outdir / name;
  if (!fs::exists(p)) {
    throw IoError("missing " + p.string() + " (run the '" + std::string(producer) +
                  "' stage first)");
  }
  return p;
}

std::vector<std::string> read_id_list(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

void stage_ingest(const PipelineConfig& cfg) {
  Corpus corpus;
  std::vector<fs::path> inputs;
  if (cfg.synth_records > 0) {
    if (!cfg.corpus_path.empty()) {
      throw ValidationError("config sets both a corpus path and synth records; pick one");
    }
    corpus = synth_corpus(cfg.synth_records, cfg.synth_responses, cfg.synth_profile, cfg.seed);
    std::cout << "ingest: synthesized " << corpus.size() << " records (profile "
              << to_string(cfg.synth_profile) << ", seed " << cfg.seed << ")\n";
  } else {
    if (cfg.corpus_path.empty()) {
      throw ValidationError("no corpus input configured (set a corpus path or synth records)");
    }
    LoadStats stats;
    corpus = load_corpus(cfg.corpus_path, cfg.strict, &stats);
    inputs.push_back(cfg.corpus_path);
    std::cout << "ingest: kept " << stats.kept << "/" << stats.total_lines << " records, "
              << stats.dropped << " dropped\n";
  }
  if (!cfg.sidecar_path.empty()) {
    LoadStats stats;
    apply_embedding_sidecar(corpus, cfg.sidecar_path, cfg.strict, &stats);
    inputs.push_back(cfg.sidecar_path);
    std::cout << "ingest: sidecar embeddings applied to " << stats.kept << " records\n";
  }
  const fs::path out = cfg.outdir / "corpus.jsonl";
  write_corpus(corpus, out);
  log_stage(cfg, "ingest", inputs, {out});
}

void stage_score(const PipelineConfig& cfg) {
  const fs::path corpus_file = require_artifact(cfg, "corpus.jsonl", "ingest");
  const Corpus corpus = load_corpus(corpus_file);
  EndpointConfig endpoint = cfg.endpoint;
  if (!cfg.rubric_file.empty()) endpoint.rubric_template = read_file(cfg.rubric_file);
  auto scored = score_corpus(corpus, cfg.provider, &endpoint);
  scored = normalize_scores(std::move(scored), cfg.normalize);
  const fs::path out = cfg.outdir / "scores.jsonl";
  write_scores(scored, out);
  std::cout << "score: " << scored.size() << " records via " << to_string(cfg.provider)
            << " (normalize " << to_string(cfg.normalize) << ")\n";
  log_stage(cfg, "score", {corpus_file}, {out});
}

void stage_map(const PipelineConfig& cfg) {
  const fs::path corpus_file = require_artifact(cfg, "corpus.jsonl", "ingest");
  const fs::path scores_file = require_artifact(cfg, "scores.jsonl", "score");
  const Corpus corpus = load_corpus(corpus_file);
  const auto scored = load_scores(corpus, scores_file);
  const DataMap map = build_map(scored, cfg.partition);
  const fs::path out = cfg.outdir / "map.csv";
  export_map(map, MapFormat::Csv, out);
  std::size_t highvar = 0, highavg = 0, lowavg = 0;
  for (const auto& p : map.points) {
    if (p.region == Region::HighVar) ++highvar;
    if (p.region == Region::HighAvg) ++highavg;
    if (p.region == Region::LowAvg) ++lowavg;
  }
  std::cout << "map: HighVar " << highvar << ", HighAvg " << highavg << ", LowAvg " << lowavg
            << "\n";
  log_stage(cfg, "map", {corpus_file, scores_file}, {out});
}

void stage_plot(const PipelineConfig& cfg) {
  const fs::path map_file = require_artifact(cfg, "map.csv", "map");
  const DataMap map = load_map_csv(map_file);
  const fs::path scatter = cfg.outdir / "scatter.svg";
  const fs::path hexbin = cfg.outdir / "hexbin.svg";
  export_map(map, MapFormat::SvgScatter, scatter);
  export_map(map, MapFormat::SvgHexbin, hexbin);
  std::cout << "plot: wrote " << scatter.string() << " and " << hexbin.string() << "\n";
  log_stage(cfg, "plot", {map_file}, {scatter, hexbin});
}

void stage_diagnose(const PipelineConfig& cfg) {
  const fs::path corpus_file = require_artifact(cfg, "corpus.jsonl", "ingest");
  const fs::path scores_file = require_artifact(cfg, "scores.jsonl", "score");
  const fs::path map_file = require_artifact(cfg, "map.csv", "map");
  const Corpus corpus = load_corpus(corpus_file);
  const auto scored = load_scores(corpus, scores_file);
  const DataMap map = load_map_csv(map_file);

  std::vector<ScoredRecord> labeled;
  for (const auto& sr : scored) {
    if (sr.record.labels) labeled.push_back(sr);
  }

  const fs::path csv_path = cfg.outdir / "diagnosis.csv";
  const fs::path high_path = cfg.outdir / "highcorr.txt";
  const fs::path low_path = cfg.outdir / "lowcorr.txt";
  const fs::path summary_path = cfg.outdir / "diagnosis_summary.json";

  ojson summary;
  if (labeled.empty()) {
    summary["status"] = "skipped: no labels";
    summary["q"] = cfg.diagnosis_q;
    summary["total"] = scored.size();
    summary["labeled"] = 0;
    write_diagnosis_csv({}, csv_path);
    write_id_list({}, high_path);
    write_id_list({}, low_path);
    std::cout << "diagnose: skipped, no labels in corpus\n";
  } else {
    const auto reports = diagnose(labeled, &map);
    write_diagnosis_csv(reports, csv_path);
    const std::size_t defined = static_cast<std::size_t>(std::count_if(
        reports.begin(), reports.end(), [](const CorrelationReport& r) { return r.defined(); }));
    std::vector<std::string> high, low;
    if (defined > 0) {
      high = select_by_correlation(reports, cfg.diagnosis_q, Tail::Top);
      low = select_by_correlation(reports, cfg.diagnosis_q, Tail::Bottom);
    }
    write_id_list(high, high_path);
    write_id_list(low, low_path);
    summary["status"] = "ok";
    summary["q"] = cfg.diagnosis_q;
    summary["total"] = scored.size();
    summary["labeled"] = labeled.size();
    summary["defined"] = defined;
    summary["undefined"] = labeled.size() - defined;
    summary["highcorr"] = high.size();
    summary["lowcorr"] = low.size();
    std::cout << "diagnose: " << defined << " defined correlations, tails " << high.size()
              << "/" << low.size() << "\n";
  }
  atomic_write(summary_path, summary.dump(2) + "\n");
  log_stage(cfg, "diagnose", {corpus_file, scores_file, map_file},
            {csv_path, high_path, low_path, summary_path});
}

void stage_select(const PipelineConfig& cfg) {
  const fs::path corpus_file = require_artifact(cfg, "corpus.jsonl", "ingest");
  const fs::path map_file = require_artifact(cfg, "map.csv", "map");
  const Corpus corpus = load_corpus(corpus_file);
  const DataMap map = load_map_csv(map_file);
  const auto ids = select(map, corpus, cfg.selection);
  const fs::path out = cfg.selected_path.empty() ? cfg.outdir / "selected.txt"
                                                 : cfg.selected_path;
  write_id_list(ids, out);
  std::cout << "select: " << ids.size() << " ids (" << to_string(cfg.selection.strategy);
  if (cfg.selection.strategy == Strategy::Region) {
    std::cout << " " << to_string(cfg.selection.region);
  }
  std::cout << ")\n";
  log_stage(cfg, "select", {corpus_file, map_file}, {out});
}

void stage_export(const PipelineConfig& cfg) {
  const fs::path corpus_file = require_artifact(cfg, "corpus.jsonl", "ingest");
  fs::path selected_file = cfg.selected_path;
  if (selected_file.empty()) {
    selected_file = require_artifact(cfg, "selected.txt", "select");
  } else if (!fs::exists(selected_file)) {
    throw IoError("missing " + selected_file.string() + " (run the 'select' stage first)");
  }
  const Corpus corpus = load_corpus(corpus_file);
  const auto ids = read_id_list(selected_file);
  std::vector<fs::path> inputs{corpus_file, selected_file};

  std::vector<TrainingPair> pairs;
  if (cfg.selection.ranking_source == RankingSource::AlignmentScores) {
    const fs::path scores_file = require_artifact(cfg, "scores.jsonl", "score");
    inputs.push_back(scores_file);
    pairs = extract_pairs(load_scores(corpus, scores_file), ids,
                          RankingSource::AlignmentScores);
  } else {
    std::unordered_map<std::string, const PreferenceRecord*> by_id;
    for (const auto& rec : corpus.records) by_id[rec.id] = &rec;
    pairs.reserve(ids.size());
    for (const auto& id : ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw ValidationError("selected id '" + id + "' is not in the corpus");
      }
      pairs.push_back(extract_pair(*it->second, RankingSource::Labels));
    }
  }
  const fs::path out = cfg.outdir / "pairs.jsonl";
  export_pairs(pairs, out);
  std::cout << "export: " << pairs.size() << " pairs ranked by "
            << to_string(cfg.selection.ranking_source) << "\n";
  log_stage(cfg, "export", inputs, {out});
}

void stage_simulate(const PipelineConfig& cfg) {
  const fs::path pairs_file = require_artifact(cfg, "pairs.jsonl", "export");
  const auto pairs = load_pairs(pairs_file);
  const DynamicsTrace trace = run_dynamics(pairs, cfg.dynamics);
  const fs::path out = cfg.trace_path.empty() ? cfg.outdir / "trace.csv" : cfg.trace_path;
  write_trace_csv(trace, out);
  const auto& first = trace.rows.front();
  const auto& last = trace.rows.back();
  std::cout << "simulate: " << to_string(cfg.dynamics.objective) << " over " << pairs.size()
            << " pairs, accuracy " << fmt_fixed(first.accuracy, 3) << " -> "
            << fmt_fixed(last.accuracy, 3) << ", margin " << fmt_fixed(first.margin, 4)
            << " -> " << fmt_fixed(last.margin, 4) << "\n";
  log_stage(cfg, "simulate", {pairs_file}, {out});
}

void stage_report(const PipelineConfig& cfg) {
  const std::string text = make_report(cfg);
  const fs::path out = cfg.outdir / "report.txt";
  atomic_write(out, text);
  std::cout << text;
  log_stage(cfg, "report",
            {cfg.outdir / "map.csv", cfg.outdir / "diagnosis_summary.json"}, {out});
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted.front();
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

std::string make_report(const PipelineConfig& cfg) {
  const fs::path map_file = require_artifact(cfg, "map.csv", "map");
  const fs::path summary_file = require_artifact(cfg, "diagnosis_summary.json", "diagnose");
  const DataMap map = load_map_csv(map_file);
  const json summary = json::parse(read_file(summary_file), nullptr, /*allow_exceptions=*/false);
  if (summary.is_discarded() || !summary.is_object()) {
    throw ValidationError(summary_file.string() + ": malformed summary");
  }

  std::ostringstream out;
  out << "Preference data map report\n";
  out << "=========================\n";
  out << "records: " << map.points.size() << "\n\n";

  out << "region   count  quality q25/q50/q75          variability q25/q50/q75\n";
  for (Region region : {Region::HighVar, Region::HighAvg, Region::LowAvg}) {
    std::vector<double> qualities, variabilities;
    for (const auto& p : map.points) {
      if (p.region != region) continue;
      qualities.push_back(p.quality);
      variabilities.push_back(p.variability);
    }
    std::sort(qualities.begin(), qualities.end());
    std::sort(variabilities.begin(), variabilities.end());
    out << to_string(region) << "  " << qualities.size() << "  ";
    if (qualities.empty()) {
      out << "-\n";
      continue;
    }
    out << fmt_fixed(quantile_sorted(qualities, 0.25), 4) << "/"
        << fmt_fixed(quantile_sorted(qualities, 0.5), 4) << "/"
        << fmt_fixed(quantile_sorted(qualities, 0.75), 4) << "  "
        << fmt_fixed(quantile_sorted(variabilities, 0.25), 4) << "/"
        << fmt_fixed(quantile_sorted(variabilities, 0.5), 4) << "/"
        << fmt_fixed(quantile_sorted(variabilities, 0.75), 4) << "\n";
  }
  out << "\n";

  const std::string status = summary.value("status", "unknown");
  out << "diagnosis: " << status << "\n";
  if (status == "ok") {
    out << "  q: " << fmt_double(summary.value("q", 0.0)) << "\n";
    out << "  defined: " << summary.value("defined", 0) << ", undefined: "
        << summary.value("undefined", 0) << "\n";
    out << "  highcorr: " << summary.value("highcorr", 0) << " ids, lowcorr: "
        << summary.value("lowcorr", 0) << " ids\n";
  }

  const fs::path selected_file =
      cfg.selected_path.empty() ? cfg.outdir / "selected.txt" : cfg.selected_path;
  if (fs::exists(selected_file)) {
    out << "selection: " << read_id_list(selected_file).size() << " ids ("
        << to_string(cfg.selection.strategy) << ")\n";
  }
  return out.str();
}

void run_stage(const PipelineConfig& cfg, Stage stage) {
  fs::create_directories(cfg.outdir);
  switch (stage) {
    case Stage::Ingest: stage_ingest(cfg); break;
    case Stage::Score: stage_score(cfg); break;
    case Stage::Map: stage_map(cfg); break;
    case Stage::Diagnose: stage_diagnose(cfg); break;
    case Stage::Select: stage_select(cfg); break;
    case Stage::Export: stage_export(cfg); break;
    case Stage::Simulate: stage_simulate(cfg); break;
    case Stage::Plot: stage_plot(cfg); break;
    case Stage::Report: stage_report(cfg); break;
  }
}

void run_all(const PipelineConfig& cfg) {
  for (Stage stage : {Stage::Ingest, Stage::Score, Stage::Map, Stage::Diagnose, Stage::Select,
                      Stage::Export, Stage::Simulate, Stage::Plot, Stage::Report}) {
    run_stage(cfg, stage);
  }
}

std::vector<TrainingPair> load_pairs(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<TrainingPair> pairs;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed pair");
    }
    for (const char* key : {"id", "prompt", "chosen", "rejected"}) {
      if (!j.contains(key) || !j[key].is_string()) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                              ": pair needs string field '" + std::string(key) + "'");
      }
    }
    TrainingPair pair;
    pair.id = j["id"].get<std::string>();
    pair.instruction = j["prompt"].get<std::string>();
    pair.chosen = j["chosen"].get<std::string>();
    pair.rejected = j["rejected"].get<std::string>();
    pair.rejected_index = 1;
    pair.source = "file";
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  const json j = json::parse(read_file(path), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw ValidationError(path.string() + ": config must be a JSON object");
  }
  PipelineConfig cfg;
  cfg.corpus_path = str_field(j, "corpus", "");
  cfg.sidecar_path = str_field(j, "embeddings_sidecar", "");
  cfg.outdir = str_field(j, "outdir", cfg.outdir.string());
  cfg.strict = bool_field(j, "strict", cfg.strict);
  cfg.seed = uint_field(j, "seed", cfg.seed);

  if (const json* synth = find_section(j, "synth")) {
    cfg.synth_records = uint_field(*synth, "records", cfg.synth_records);
    cfg.synth_responses = uint_field(*synth, "responses", cfg.synth_responses);
    cfg.synth_profile =
        quality_profile_from_string(str_field(*synth, "profile", to_string(cfg.synth_profile)));
  }
  if (const json* scoring = find_section(j, "scoring")) {
    cfg.provider = provider_from_string(str_field(*scoring, "provider", to_string(cfg.provider)));
    cfg.normalize =
        normalize_method_from_string(str_field(*scoring, "normalize", to_string(cfg.normalize)));
    cfg.rubric_file = str_field(*scoring, "rubric_file", "");
    if (const json* endpoint = find_section(*scoring, "endpoint")) {
      cfg.endpoint.base_url = str_field(*endpoint, "base_url", cfg.endpoint.base_url);
      cfg.endpoint.auth_env = str_field(*endpoint, "auth_env", cfg.endpoint.auth_env);
      cfg.endpoint.model = str_field(*endpoint, "model", cfg.endpoint.model);
      cfg.endpoint.timeout_s = num_field(*endpoint, "timeout_s", cfg.endpoint.timeout_s);
      cfg.endpoint.max_retries = static_cast<int>(
          uint_field(*endpoint, "max_retries", static_cast<std::uint64_t>(cfg.endpoint.max_retries)));
      cfg.endpoint.backoff_s = num_field(*endpoint, "backoff_s", cfg.endpoint.backoff_s);
      cfg.endpoint.rubric_template =
          str_field(*endpoint, "rubric_template", cfg.endpoint.rubric_template);
      cfg.endpoint.score_lo = num_field(*endpoint, "score_lo", cfg.endpoint.score_lo);
      cfg.endpoint.score_hi = num_field(*endpoint, "score_hi", cfg.endpoint.score_hi);
      cfg.endpoint.parallelism = static_cast<int>(
          uint_field(*endpoint, "parallelism", static_cast<std::uint64_t>(cfg.endpoint.parallelism)));
    }
  }
  if (const json* partition = find_section(j, "partition")) {
    cfg.partition.var_ratio = num_field(*partition, "var_ratio", cfg.partition.var_ratio);
    cfg.partition.quality_split =
        num_field(*partition, "quality_split", cfg.partition.quality_split);
  }
  if (const json* selection = find_section(j, "selection")) {
    cfg.selection.strategy =
        strategy_from_string(str_field(*selection, "strategy", to_string(cfg.selection.strategy)));
    cfg.selection.region =
        region_from_string(str_field(*selection, "region", to_string(cfg.selection.region)));
    cfg.selection.ratio = num_field(*selection, "ratio", cfg.selection.ratio);
    cfg.selection.ranking_source = ranking_source_from_string(
        str_field(*selection, "ranking_source", to_string(cfg.selection.ranking_source)));
  }
  if (const json* diagnosis = find_section(j, "diagnosis")) {
    cfg.diagnosis_q = num_field(*diagnosis, "q", cfg.diagnosis_q);
  }
  if (const json* dynamics = find_section(j, "dynamics")) {
    cfg.dynamics.objective =
        objective_from_string(str_field(*dynamics, "objective", to_string(cfg.dynamics.objective)));
    cfg.dynamics.beta = num_field(*dynamics, "beta", cfg.dynamics.beta);
    cfg.gamma_beta_ratio = num_field(*dynamics, "gamma_beta_ratio", cfg.gamma_beta_ratio);
    cfg.dynamics.learning_rate =
        num_field(*dynamics, "learning_rate", cfg.dynamics.learning_rate);
    cfg.dynamics.steps = uint_field(*dynamics, "steps", cfg.dynamics.steps);
    cfg.dynamics.init_scale = num_field(*dynamics, "init_scale", cfg.dynamics.init_scale);
  }
  cfg.finalize();
  return cfg;
}

}  // namespace alignmap
