#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alignmap/cartography.hpp"

namespace alignmap {

enum class Strategy { Region, Random, Full, QualityOnly, VariabilityOnly, LowVarNoQuality };

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);

enum class RankingSource { Labels, AlignmentScores };

RankingSource ranking_source_from_string(const std::string& s);
std::string to_string(RankingSource s);

struct SelectionSpec {
  Strategy strategy = Strategy::Region;
  Region region = Region::HighAvg;     // for Strategy::Region
  double ratio = 0.33;                 // fraction of the corpus; Full ignores it
  std::uint64_t seed = 42;
  RankingSource ranking_source = RankingSource::Labels;
};

/// Returns the selected record ids. Region selections rank within the region
/// by its defining statistic (quality desc for HighAvg, variability desc for
/// HighVar, quality asc for LowAvg) and truncate to ceil(ratio*N) if the
/// region is larger; Random samples ceil(ratio*N) without replacement;
/// LowVarNoQuality takes a seeded random half of the non-HighVar remainder.
std::vector<std::string> select(const DataMap& map, const Corpus& corpus,
                                const SelectionSpec& spec);

struct TrainingPair {
  std::string id;
  std::string instruction;
  std::string chosen;
  std::string rejected;
  std::size_t chosen_index = 0;
  std::size_t rejected_index = 0;
  std::string source;  // which ranking produced the pair: labels | alignment_scores
  bool tied = false;   // all ranking values equal; pair fell back to (0, 1)
};

/// chosen = first argmax of the ranking values, rejected = first argmin among
/// the remaining indices.
TrainingPair extract_pair(const PreferenceRecord& rec, RankingSource source);
TrainingPair extract_pair(const ScoredRecord& scored, RankingSource source);

/// Pairs for the given ids (all corpus records when ids is empty), in id order.
std::vector<TrainingPair> extract_pairs(const std::vector<ScoredRecord>& scored,
                                        const std::vector<std::string>& ids,
                                        RankingSource source);

/// dpo-jsonl: one {id, prompt, chosen, rejected} object per line, sorted by id.
void export_pairs(const std::vector<TrainingPair>& pairs, const std::filesystem::path& path);

}  // namespace alignmap
