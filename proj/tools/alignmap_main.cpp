#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "alignmap/errors.hpp"
#include "alignmap/pipeline.hpp"

namespace {

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> corpus, sidecar, outdir;
  std::optional<std::uint64_t> seed;
  bool lenient = false;
  std::optional<std::size_t> synth_records, synth_responses;
  std::optional<std::string> synth_profile;
  std::optional<std::string> provider, normalize, rubric_file, endpoint, model, auth_env;
  std::optional<double> timeout_s, backoff_s, score_lo, score_hi;
  std::optional<int> retries, parallelism;
  std::optional<double> var_ratio, quality_split;
  std::optional<std::string> strategy, region, ranking_source;
  std::optional<double> ratio, q;
  std::optional<std::string> objective;
  std::optional<double> beta, gamma_beta_ratio, lr, init_scale;
  std::optional<std::size_t> steps;
  std::optional<std::string> out, trace_out;
};

void add_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "pipeline config file (JSON)");
  sub->add_option("--corpus", o.corpus, "input corpus JSONL");
  sub->add_option("--sidecar", o.sidecar, "embeddings sidecar JSONL");
  sub->add_option("--outdir", o.outdir, "artifact directory (default: out)");
  sub->add_option("--seed", o.seed, "global seed for every seeded stage");
  sub->add_flag("--lenient", o.lenient, "drop invalid records instead of failing");
  sub->add_option("--synth-records", o.synth_records, "synthesize N records at ingest");
  sub->add_option("--synth-responses", o.synth_responses, "responses per synthetic record");
  sub->add_option("--synth-profile", o.synth_profile, "high|low|mixed");
  sub->add_option("--provider", o.provider, "precomputed|reference|judge|reward");
  sub->add_option("--normalize", o.normalize, "none|minmax|zscore");
  sub->add_option("--rubric-file", o.rubric_file, "judge rubric template file");
  sub->add_option("--endpoint", o.endpoint, "judge/reward endpoint URL");
  sub->add_option("--model", o.model, "model identifier sent to the judge endpoint");
  sub->add_option("--auth-env", o.auth_env, "env var holding the bearer token");
  sub->add_option("--timeout", o.timeout_s, "endpoint timeout in seconds");
  sub->add_option("--retries", o.retries, "endpoint retry count");
  sub->add_option("--backoff", o.backoff_s, "first retry delay in seconds");
  sub->add_option("--parallelism", o.parallelism, "max in-flight endpoint requests");
  sub->add_option("--score-lo", o.score_lo, "lowest accepted judge score");
  sub->add_option("--score-hi", o.score_hi, "highest accepted judge score");
  sub->add_option("--var-ratio", o.var_ratio, "fraction of records sent to HighVar");
  sub->add_option("--quality-split", o.quality_split, "HighAvg fraction of the remainder");
  sub->add_option("--strategy", o.strategy,
                  "region|random|full|quality-only|variability-only|low-var-no-quality");
  sub->add_option("--region", o.region, "HighAvg|HighVar|LowAvg");
  sub->add_option("--ratio", o.ratio, "selection ratio in (0,1]");
  sub->add_option("--ranking-source", o.ranking_source, "labels|alignment_scores");
  sub->add_option("--q", o.q, "correlation tail fraction");
  sub->add_option("--objective", o.objective, "simpo|dpo");
  sub->add_option("--beta", o.beta, "preference loss beta");
  sub->add_option("--gamma-beta-ratio", o.gamma_beta_ratio, "SimPO gamma as a fraction of beta");
  sub->add_option("--lr", o.lr, "learning rate");
  sub->add_option("--steps", o.steps, "gradient descent steps");
  sub->add_option("--init-scale", o.init_scale, "policy init scale");
  sub->add_option("--out", o.out, "override the selected-ids output path");
  sub->add_option("--trace-out", o.trace_out, "override the trace CSV path");
}

alignmap::PipelineConfig build_config(const Overrides& o) {
  alignmap::PipelineConfig cfg;
  if (o.config) cfg = alignmap::load_pipeline_config(*o.config);
  if (o.corpus) cfg.corpus_path = *o.corpus;
  if (o.sidecar) cfg.sidecar_path = *o.sidecar;
  if (o.outdir) cfg.outdir = *o.outdir;
  if (o.seed) cfg.seed = *o.seed;
  if (o.lenient) cfg.strict = false;
  if (o.synth_records) cfg.synth_records = *o.synth_records;
  if (o.synth_responses) cfg.synth_responses = *o.synth_responses;
  if (o.synth_profile) cfg.synth_profile = alignmap::quality_profile_from_string(*o.synth_profile);
  if (o.provider) cfg.provider = alignmap::provider_from_string(*o.provider);
  if (o.normalize) cfg.normalize = alignmap::normalize_method_from_string(*o.normalize);
  if (o.rubric_file) cfg.rubric_file = *o.rubric_file;
  if (o.endpoint) cfg.endpoint.base_url = *o.endpoint;
  if (o.model) cfg.endpoint.model = *o.model;
  if (o.auth_env) cfg.endpoint.auth_env = *o.auth_env;
  if (o.timeout_s) cfg.endpoint.timeout_s = *o.timeout_s;
  if (o.retries) cfg.endpoint.max_retries = *o.retries;
  if (o.backoff_s) cfg.endpoint.backoff_s = *o.backoff_s;
  if (o.parallelism) cfg.endpoint.parallelism = *o.parallelism;
  if (o.score_lo) cfg.endpoint.score_lo = *o.score_lo;
  if (o.score_hi) cfg.endpoint.score_hi = *o.score_hi;
  if (o.var_ratio) cfg.partition.var_ratio = *o.var_ratio;
  if (o.quality_split) cfg.partition.quality_split = *o.quality_split;
  if (o.strategy) cfg.selection.strategy = alignmap::strategy_from_string(*o.strategy);
  if (o.region) cfg.selection.region = alignmap::region_from_string(*o.region);
  if (o.ratio) cfg.selection.ratio = *o.ratio;
  if (o.ranking_source) {
    cfg.selection.ranking_source = alignmap::ranking_source_from_string(*o.ranking_source);
  }
  if (o.q) cfg.diagnosis_q = *o.q;
  if (o.objective) cfg.dynamics.objective = alignmap::objective_from_string(*o.objective);
  if (o.beta) cfg.dynamics.beta = *o.beta;
  if (o.gamma_beta_ratio) cfg.gamma_beta_ratio = *o.gamma_beta_ratio;
  if (o.lr) cfg.dynamics.learning_rate = *o.lr;
  if (o.steps) cfg.dynamics.steps = *o.steps;
  if (o.init_scale) cfg.dynamics.init_scale = *o.init_scale;
  if (o.out) cfg.selected_path = *o.out;
  if (o.trace_out) cfg.trace_path = *o.trace_out;
  cfg.finalize();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alignmap: quality/variability maps, subset selection and label diagnosis "
               "for preference datasets"};
  app.require_subcommand(1);
  Overrides o;
  for (const char* name : {"ingest", "score", "map", "diagnose", "select", "export", "simulate",
                           "plot", "report"}) {
    add_flags(app.add_subcommand(name, "run the " + std::string(name) + " stage"), o);
  }
  add_flags(app.add_subcommand("run-all", "run every stage in order"), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const alignmap::PipelineConfig cfg = build_config(o);
    for (const CLI::App* sub : app.get_subcommands()) {
      if (sub->get_name() == "run-all") {
        alignmap::run_all(cfg);
      } else {
        alignmap::run_stage(cfg, alignmap::stage_from_string(sub->get_name()));
      }
    }
    return 0;
  } catch (const alignmap::NetworkError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
