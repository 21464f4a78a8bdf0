#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alignmap/scoring.hpp"

namespace alignmap {

enum class Region { Unassigned, HighVar, HighAvg, LowAvg };

std::string to_string(Region r);
Region region_from_string(const std::string& s);

struct MapPoint {
  std::string id;
  double quality = 0.0;      // mean alignment score
  double variability = 0.0;  // population variance of alignment scores
  Region region = Region::Unassigned;
  std::size_t n_responses = 0;
};

struct PartitionSpec {
  double var_ratio = 0.33;      // fraction of the corpus sent to HighVar
  double quality_split = 0.5;   // fraction of the remainder sent to HighAvg
  std::uint64_t seed = 42;      // partition is deterministic; kept for seeded baselines
};

struct DataMap {
  std::vector<MapPoint> points;  // corpus order
  PartitionSpec partition;
  Provider provider = Provider::Precomputed;
};

/// Mean of the record's alignment scores (needs >= 1).
double quality(const ScoredRecord& scored);

/// Population variance of the record's alignment scores (needs >= 2).
double variability(const ScoredRecord& scored);

/// Top ceil(var_ratio*N) records by variability become HighVar; the remainder
/// is split by quality, upper ceil(quality_split*M) = HighAvg, rest = LowAvg.
/// Ties broken by ascending id. Needs >= 3 records, all from one provider.
DataMap build_map(const std::vector<ScoredRecord>& scored, const PartitionSpec& spec = {});

enum class MapFormat { Csv, SvgScatter, SvgHexbin };

MapFormat map_format_from_string(const std::string& s);

void export_map(const DataMap& map, MapFormat format, const std::filesystem::path& path);

/// Reads a map back from its CSV form (n_responses is not stored there).
DataMap load_map_csv(const std::filesystem::path& path);

}  // namespace alignmap
