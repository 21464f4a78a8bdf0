#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace alignmap {

struct EmbeddingSet {
  std::vector<Eigen::VectorXd> vectors;          // one per response, same dimension
  std::optional<Eigen::VectorXd> reference;      // embedding of the reference answer
};

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b);

struct PreferenceRecord {
  std::string id;
  std::string instruction;
  std::vector<std::string> responses;            // n >= 2
  std::optional<std::vector<double>> labels;     // annotation scores, size n
  std::optional<std::string> reference;
  std::optional<EmbeddingSet> embeddings;
  std::optional<std::vector<double>> scores;     // precomputed alignment scores, size n

  std::size_t n_responses() const { return responses.size(); }
};

bool operator==(const PreferenceRecord& a, const PreferenceRecord& b);

struct CorpusMetadata {
  std::string source;
  std::optional<double> score_min;               // hint: label scale bounds
  std::optional<double> score_max;
  std::string created;

  bool operator==(const CorpusMetadata&) const = default;
  bool is_default() const { return *this == CorpusMetadata{}; }
};

struct Corpus {
  std::vector<PreferenceRecord> records;
  CorpusMetadata metadata;

  std::size_t size() const { return records.size(); }
};

bool operator==(const Corpus& a, const Corpus& b);

struct LoadStats {
  std::size_t total_lines = 0;                   // candidate record lines (meta line excluded)
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::vector<std::string> issues;               // one message per dropped/suspect line
};

/// Throws ValidationError naming the record id on any invariant violation.
/// Preference corpora need at least two responses per record; callers that
/// only consume responses one at a time may lower min_responses to 1.
void validate_record(const PreferenceRecord& rec, std::size_t min_responses = 2);

/// Reads line-delimited JSON. strict: any invalid line throws. lenient:
/// invalid lines are dropped and counted (kept + dropped == total_lines).
/// Duplicate ids keep the first occurrence in lenient mode.
Corpus load_corpus(const std::filesystem::path& path, bool strict = true,
                   LoadStats* stats = nullptr);

/// Deterministic, byte-stable serialization; load_corpus round-trips exactly.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Merges a sidecar JSONL file of {id, vectors, reference_vector} into the
/// corpus. Sidecar entries replace inline embeddings; unknown ids are
/// reported through stats, invalid entries throw (strict) or drop (lenient).
void apply_embedding_sidecar(Corpus& corpus, const std::filesystem::path& path,
                             bool strict = true, LoadStats* stats = nullptr);

enum class QualityProfile { High, Low, Mixed };

QualityProfile quality_profile_from_string(const std::string& s);
std::string to_string(QualityProfile p);

/// Pure function of its arguments. Labels follow the requested profile
/// (high mean / low mean / wide spread) on a 0-10 scale; embeddings are
/// built so that cosine(embedding_i, reference_embedding) == label_i / 10.
Corpus synth_corpus(std::size_t n_records, std::size_t n_responses,
                    QualityProfile profile, std::uint64_t seed);

}  // namespace alignmap
