#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alignmap/cartography.hpp"
#include "alignmap/corpus.hpp"
#include "alignmap/dynamics.hpp"
#include "alignmap/scoring.hpp"
#include "alignmap/selection.hpp"

namespace alignmap {

struct PipelineConfig {
  std::filesystem::path corpus_path;   // input corpus; empty when synthesizing
  std::filesystem::path sidecar_path;  // optional embeddings sidecar
  std::filesystem::path outdir = "out";
  bool strict = true;
  std::uint64_t seed = 42;

  std::size_t synth_records = 0;  // > 0: ingest generates a corpus instead of reading one
  std::size_t synth_responses = 4;
  QualityProfile synth_profile = QualityProfile::Mixed;

  Provider provider = Provider::Precomputed;
  NormalizeMethod normalize = NormalizeMethod::None;
  EndpointConfig endpoint;
  std::filesystem::path rubric_file;  // judge rubric template, read at score time

  PartitionSpec partition;
  SelectionSpec selection;
  double diagnosis_q = 0.01;

  LossConfig dynamics;
  double gamma_beta_ratio = 0.5;
  std::filesystem::path trace_path;     // empty = <outdir>/trace.csv
  std::filesystem::path selected_path;  // empty = <outdir>/selected.txt

  /// Propagates the global seed into every seeded stage and resolves gamma.
  void finalize();
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

enum class Stage { Ingest, Score, Map, Diagnose, Select, Export, Simulate, Plot, Report };

Stage stage_from_string(const std::string& s);
std::string to_string(Stage stage);

/// Runs one stage against the artifacts in cfg.outdir. Missing upstream
/// artifacts raise IoError naming the expected path; outputs are written
/// atomically and a manifest line is appended to <outdir>/run_log.jsonl.
void run_stage(const PipelineConfig& cfg, Stage stage);

void run_all(const PipelineConfig& cfg);

/// Region sizes, per-region quartiles, diagnosis and selection summaries.
std::string make_report(const PipelineConfig& cfg);

std::vector<TrainingPair> load_pairs(const std::filesystem::path& path);

}  // namespace alignmap
