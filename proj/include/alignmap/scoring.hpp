#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alignmap/corpus.hpp"

namespace alignmap {

enum class Provider { Precomputed, Reference, Judge, Reward };

std::string to_string(Provider p);
Provider provider_from_string(const std::string& s);

struct AlignmentScore {
  double value = 0.0;
  Provider provider = Provider::Precomputed;
  std::optional<std::string> raw;  // provider-native payload (judge reply text, reward body)
};

struct ScoredRecord {
  PreferenceRecord record;
  std::vector<AlignmentScore> scores;  // one per response
  Provider provider = Provider::Precomputed;

  Eigen::VectorXd score_values() const;
};

struct EndpointConfig {
  std::string base_url;        // e.g. http://127.0.0.1:8080/v1/chat
  std::string auth_env;        // env var holding a bearer token; empty = no auth
  std::string model;
  double timeout_s = 30.0;
  int max_retries = 2;         // attempts = max_retries + 1
  double backoff_s = 1.0;      // first retry delay, doubled per retry
  std::string rubric_template; // judge only; needs {instruction} and {response}
  double score_lo = 0.0;       // accepted judge score range
  double score_hi = 10.0;
  int parallelism = 8;         // max in-flight requests
};

/// Copies the record's own scores (or labels as a fallback) verbatim.
ScoredRecord score_precomputed(const PreferenceRecord& rec);

/// score_i = cosine(embedding_i, reference_embedding).
ScoredRecord score_reference(const PreferenceRecord& rec);

/// One chat request per response; the score is the first decimal number in
/// the reply text, bounds-checked against [score_lo, score_hi].
ScoredRecord score_judge(const PreferenceRecord& rec, const EndpointConfig& cfg);

/// One request per response; the endpoint returns {"reward": number}.
ScoredRecord score_reward(const PreferenceRecord& rec, const EndpointConfig& cfg);

/// cfg may be null for Precomputed/Reference.
std::vector<ScoredRecord> score_corpus(const Corpus& corpus, Provider provider,
                                       const EndpointConfig* cfg = nullptr);

enum class NormalizeMethod { None, Minmax, Zscore };

NormalizeMethod normalize_method_from_string(const std::string& s);
std::string to_string(NormalizeMethod m);

/// Corpus-wide rescaling: minmax maps [min,max] -> [0,1], zscore centers on
/// the corpus mean / population std. A degenerate corpus (all scores equal)
/// maps to 0.5 (minmax) or 0 (zscore). Within-record ranking is preserved.
std::vector<ScoredRecord> normalize_scores(std::vector<ScoredRecord> scored,
                                           NormalizeMethod method);

/// JSONL of {id, provider, values}; raw payloads are not persisted.
void write_scores(const std::vector<ScoredRecord>& scored, const std::filesystem::path& path);

/// Joins a scores file back onto a corpus by id; every record must be covered.
std::vector<ScoredRecord> load_scores(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace alignmap
