#pragma once

#include <optional>
#include <string>
#include <vector>

#include "alignmap/cartography.hpp"

namespace alignmap {

struct CorrelationReport {
  std::string id;
  std::optional<double> s_corr;  // empty when either vector has zero norm
  Region region = Region::Unassigned;
  bool zero_label_vector = false;
  bool zero_score_vector = false;

  bool defined() const { return s_corr.has_value(); }
};

/// Cosine similarity between the record's label vector and score vector.
/// Zero-norm vectors yield an undefined report with the matching flag set
/// instead of an error, so one bad record cannot abort a batch.
CorrelationReport correlation(const ScoredRecord& scored);

/// Per-record correlation, annotated with map regions when a map is given.
std::vector<CorrelationReport> diagnose(const std::vector<ScoredRecord>& scored,
                                        const DataMap* map = nullptr);

enum class Tail { Top, Bottom };

/// ceil(q * N_defined) ids from the requested correlation tail, ties by id.
/// Undefined reports never rank; at least one defined report is required.
std::vector<std::string> select_by_correlation(const std::vector<CorrelationReport>& reports,
                                               double q, Tail end);

/// The record with labels replaced by its alignment scores, so downstream
/// pair extraction ranks by score.
PreferenceRecord relabel_from_scores(const ScoredRecord& scored);

/// CSV: id, s_corr (empty when undefined), region, flags ('|'-joined).
void write_diagnosis_csv(const std::vector<CorrelationReport>& reports,
                         const std::filesystem::path& path);

void write_id_list(const std::vector<std::string>& ids, const std::filesystem::path& path);

}  // namespace alignmap
