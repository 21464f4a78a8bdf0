#include "alignmap/cartography.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/math.hpp"
#include "alignmap/svg.hpp"

namespace alignmap {

std::string to_string(Region r) {
  switch (r) {
    case Region::HighVar: return "HighVar";
    case Region::HighAvg: return "HighAvg";
    case Region::LowAvg: return "LowAvg";
    case Region::Unassigned: return "Unassigned";
  }
  return "Unassigned";
}

Region region_from_string(const std::string& s) {
  if (s == "HighVar") return Region::HighVar;
  if (s == "HighAvg") return Region::HighAvg;
  if (s == "LowAvg") return Region::LowAvg;
  if (s == "Unassigned") return Region::Unassigned;
  throw ValidationError("unknown region '" + s + "'");
}

static Eigen::VectorXd checked_values(const ScoredRecord& scored, std::size_t min_n) {
  const Eigen::VectorXd v = scored.score_values();
  if (static_cast<std::size_t>(v.size()) < min_n) {
    throw ValidationError("record '" + scored.record.id + "': needs at least " +
                          std::to_string(min_n) + " scores, got " + std::to_string(v.size()));
  }
  if (!v.allFinite()) {
    throw ValidationError("record '" + scored.record.id + "': non-finite score");
  }
  return v;
}

double quality(const ScoredRecord& scored) { return mean(checked_values(scored, 1)); }

double variability(const ScoredRecord& scored) {
  return population_variance(checked_values(scored, 2));
}

DataMap build_map(const std::vector<ScoredRecord>& scored, const PartitionSpec& spec) {
  if (scored.size() < 3) {
    throw ValidationError("map needs at least 3 records, got " + std::to_string(scored.size()));
  }
  if (spec.var_ratio <= 0.0 || spec.var_ratio >= 1.0) {
    throw ValidationError("var_ratio must be in (0, 1)");
  }
  if (spec.quality_split <= 0.0 || spec.quality_split >= 1.0) {
    throw ValidationError("quality_split must be in (0, 1)");
  }

  DataMap map;
  map.partition = spec;
  map.provider = scored.front().provider;
  map.points.reserve(scored.size());
  std::unordered_set<std::string> seen;
  for (const auto& sr : scored) {
    if (sr.provider != map.provider) {
      throw ValidationError("record '" + sr.record.id + "': mixed score providers (" +
                            to_string(sr.provider) + " vs " + to_string(map.provider) + ")");
    }
    if (!seen.insert(sr.record.id).second) {
      throw ValidationError("duplicate record id '" + sr.record.id + "'");
    }
    MapPoint p;
    p.id = sr.record.id;
    p.quality = quality(sr);
    p.variability = variability(sr);
    p.n_responses = sr.scores.size();
    map.points.push_back(std::move(p));
  }

  const std::size_t n = map.points.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (map.points[a].variability != map.points[b].variability) {
      return map.points[a].variability > map.points[b].variability;
    }
    return map.points[a].id < map.points[b].id;
  });
  const std::size_t n_highvar = count_ceil(spec.var_ratio, n);
  for (std::size_t k = 0; k < n_highvar; ++k) map.points[order[k]].region = Region::HighVar;

  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(n_highvar),
                                order.end());
  std::sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
    if (map.points[a].quality != map.points[b].quality) {
      return map.points[a].quality > map.points[b].quality;
    }
    return map.points[a].id < map.points[b].id;
  });
  const std::size_t n_highavg = count_ceil(spec.quality_split, rest.size());
  for (std::size_t k = 0; k < rest.size(); ++k) {
    map.points[rest[k]].region = k < n_highavg ? Region::HighAvg : Region::LowAvg;
  }
  return map;
}

MapFormat map_format_from_string(const std::string& s) {
  if (s == "csv") return MapFormat::Csv;
  if (s == "svg-scatter") return MapFormat::SvgScatter;
  if (s == "svg-hexbin") return MapFormat::SvgHexbin;
  throw ValidationError("unknown map format '" + s + "' (expected csv|svg-scatter|svg-hexbin)");
}

static std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

static std::string map_to_csv(const DataMap& map) {
  std::string out = "id,quality,variability,region\n";
  for (const auto& p : map.points) {
    out += csv_field(p.id);
    out += ',';
    out += fmt_double(p.quality);
    out += ',';
    out += fmt_double(p.variability);
    out += ',';
    out += to_string(p.region);
    out += '\n';
  }
  return out;
}

void export_map(const DataMap& map, MapFormat format, const std::filesystem::path& path) {
  if (map.points.empty()) throw ValidationError("cannot export an empty map");
  switch (format) {
    case MapFormat::Csv:
      atomic_write(path, map_to_csv(map));
      break;
    case MapFormat::SvgScatter:
      atomic_write(path, render_scatter_svg(map));
      break;
    case MapFormat::SvgHexbin:
      atomic_write(path, render_hexbin_svg(map));
      break;
  }
}

static std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

DataMap load_map_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty map file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,quality,variability,region") {
    throw ValidationError(path.string() + ": unexpected map header '" + line + "'");
  }
  DataMap map;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    }
    MapPoint p;
    p.id = fields[0];
    try {
      p.quality = std::stod(fields[1]);
      p.variability = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    p.region = region_from_string(fields[3]);
    map.points.push_back(std::move(p));
  }
  return map;
}

}  // namespace alignmap
