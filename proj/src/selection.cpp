#include "alignmap/selection.hpp"

#include <json.hpp>

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/math.hpp"
#include "alignmap/rng.hpp"

namespace alignmap {

using ojson = nlohmann::ordered_json;

Strategy strategy_from_string(const std::string& s) {
  if (s == "region") return Strategy::Region;
  if (s == "random") return Strategy::Random;
  if (s == "full") return Strategy::Full;
  if (s == "quality-only") return Strategy::QualityOnly;
  if (s == "variability-only") return Strategy::VariabilityOnly;
  if (s == "low-var-no-quality") return Strategy::LowVarNoQuality;
  throw ValidationError("unknown strategy '" + s +
                        "' (expected region|random|full|quality-only|variability-only|"
                        "low-var-no-quality)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Region: return "region";
    case Strategy::Random: return "random";
    case Strategy::Full: return "full";
    case Strategy::QualityOnly: return "quality-only";
    case Strategy::VariabilityOnly: return "variability-only";
    case Strategy::LowVarNoQuality: return "low-var-no-quality";
  }
  return "region";
}

RankingSource ranking_source_from_string(const std::string& s) {
  if (s == "labels") return RankingSource::Labels;
  if (s == "alignment_scores" || s == "alignment-scores" || s == "scores") {
    return RankingSource::AlignmentScores;
  }
  throw ValidationError("unknown ranking source '" + s + "' (expected labels|alignment_scores)");
}

std::string to_string(RankingSource s) {
  return s == RankingSource::Labels ? "labels" : "alignment_scores";
}

std::vector<std::string> select(const DataMap& map, const Corpus& corpus,
                                const SelectionSpec& spec) {
  if (spec.strategy != Strategy::Full && (spec.ratio <= 0.0 || spec.ratio > 1.0)) {
    throw ValidationError("selection ratio must be in (0, 1]");
  }
  std::unordered_map<std::string, const MapPoint*> by_id;
  for (const auto& p : map.points) by_id[p.id] = &p;
  if (by_id.size() != corpus.records.size()) {
    throw ValidationError("map has " + std::to_string(by_id.size()) + " points for " +
                          std::to_string(corpus.records.size()) + " corpus records");
  }
  for (const auto& rec : corpus.records) {
    if (!by_id.count(rec.id)) {
      throw ValidationError("record '" + rec.id + "' is missing from the map");
    }
  }

  const std::size_t n = corpus.records.size();
  // points in corpus order, so seeded sampling is corpus-order stable
  std::vector<const MapPoint*> points;
  points.reserve(n);
  for (const auto& rec : corpus.records) points.push_back(by_id[rec.id]);

  auto take_ids = [](const std::vector<const MapPoint*>& src, std::size_t k) {
    std::vector<std::string> ids;
    ids.reserve(k);
    for (std::size_t i = 0; i < k && i < src.size(); ++i) ids.push_back(src[i]->id);
    return ids;
  };
  auto sort_by = [](std::vector<const MapPoint*>& v, auto key, bool desc) {
    std::sort(v.begin(), v.end(), [&](const MapPoint* a, const MapPoint* b) {
      if (key(a) != key(b)) return desc ? key(a) > key(b) : key(a) < key(b);
      return a->id < b->id;
    });
  };
  const auto by_quality = [](const MapPoint* p) { return p->quality; };
  const auto by_variability = [](const MapPoint* p) { return p->variability; };

  switch (spec.strategy) {
    case Strategy::Full: {
      std::vector<std::string> ids;
      ids.reserve(n);
      for (const auto& rec : corpus.records) ids.push_back(rec.id);
      return ids;
    }
    case Strategy::Random: {
      Rng rng(spec.seed);
      const auto picks = rng.sample_indices(n, count_ceil(spec.ratio, n));
      std::vector<std::string> ids;
      ids.reserve(picks.size());
      for (std::size_t i : picks) ids.push_back(points[i]->id);
      return ids;
    }
    case Strategy::Region: {
      std::vector<const MapPoint*> members;
      for (const auto* p : points) {
        if (p->region == spec.region) members.push_back(p);
      }
      switch (spec.region) {
        case Region::HighAvg: sort_by(members, by_quality, /*desc=*/true); break;
        case Region::HighVar: sort_by(members, by_variability, /*desc=*/true); break;
        case Region::LowAvg: sort_by(members, by_quality, /*desc=*/false); break;
        case Region::Unassigned:
          throw ValidationError("cannot select the Unassigned region");
      }
      return take_ids(members, std::min(members.size(), count_ceil(spec.ratio, n)));
    }
    case Strategy::QualityOnly: {
      std::vector<const MapPoint*> all = points;
      sort_by(all, by_quality, /*desc=*/true);
      return take_ids(all, count_ceil(spec.ratio, n));
    }
    case Strategy::VariabilityOnly: {
      std::vector<const MapPoint*> all = points;
      sort_by(all, by_variability, /*desc=*/false);
      return take_ids(all, count_ceil(spec.ratio, n));
    }
    case Strategy::LowVarNoQuality: {
      std::vector<const MapPoint*> remainder;
      for (const auto* p : points) {
        if (p->region != Region::HighVar) remainder.push_back(p);
      }
      Rng rng(spec.seed);
      const auto picks = rng.sample_indices(remainder.size(), count_ceil(0.5, remainder.size()));
      std::vector<std::string> ids;
      ids.reserve(picks.size());
      for (std::size_t i : picks) ids.push_back(remainder[i]->id);
      return ids;
    }
  }
  throw ValidationError("unreachable selection strategy");
}

static TrainingPair pair_from_values(const PreferenceRecord& rec,
                                     const std::vector<double>& values, RankingSource source) {
  if (values.size() != rec.responses.size()) {
    throw ValidationError("record '" + rec.id + "': " + std::to_string(values.size()) +
                          " ranking values for " + std::to_string(rec.responses.size()) +
                          " responses");
  }
  if (values.size() < 2) {
    throw ValidationError("record '" + rec.id + "': needs at least 2 responses");
  }
  std::size_t chosen = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[chosen]) chosen = i;
  }
  std::size_t rejected = chosen == 0 ? 1 : 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i != chosen && values[i] < values[rejected]) rejected = i;
  }
  TrainingPair pair;
  pair.id = rec.id;
  pair.instruction = rec.instruction;
  pair.chosen = rec.responses[chosen];
  pair.rejected = rec.responses[rejected];
  pair.chosen_index = chosen;
  pair.rejected_index = rejected;
  pair.source = to_string(source);
  pair.tied = values[chosen] == values[rejected];
  return pair;
}

TrainingPair extract_pair(const PreferenceRecord& rec, RankingSource source) {
  if (source == RankingSource::Labels) {
    if (!rec.labels) throw ValidationError("record '" + rec.id + "': no labels to rank by");
    return pair_from_values(rec, *rec.labels, source);
  }
  if (!rec.scores) {
    throw ValidationError("record '" + rec.id + "': no alignment scores to rank by");
  }
  return pair_from_values(rec, *rec.scores, source);
}

TrainingPair extract_pair(const ScoredRecord& scored, RankingSource source) {
  if (source == RankingSource::Labels) return extract_pair(scored.record, source);
  std::vector<double> values;
  values.reserve(scored.scores.size());
  for (const auto& s : scored.scores) values.push_back(s.value);
  return pair_from_values(scored.record, values, source);
}

std::vector<TrainingPair> extract_pairs(const std::vector<ScoredRecord>& scored,
                                        const std::vector<std::string>& ids,
                                        RankingSource source) {
  std::vector<TrainingPair> pairs;
  if (ids.empty()) {
    pairs.reserve(scored.size());
    for (const auto& sr : scored) pairs.push_back(extract_pair(sr, source));
  } else {
    std::unordered_map<std::string, const ScoredRecord*> by_id;
    for (const auto& sr : scored) by_id[sr.record.id] = &sr;
    pairs.reserve(ids.size());
    for (const auto& id : ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw ValidationError("selected id '" + id + "' is not in the scored corpus");
      }
      pairs.push_back(extract_pair(*it->second, source));
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const TrainingPair& a, const TrainingPair& b) { return a.id < b.id; });
  return pairs;
}

void export_pairs(const std::vector<TrainingPair>& pairs, const std::filesystem::path& path) {
  if (pairs.empty()) throw ValidationError("no training pairs to export");
  std::vector<const TrainingPair*> sorted;
  sorted.reserve(pairs.size());
  for (const auto& p : pairs) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(),
            [](const TrainingPair* a, const TrainingPair* b) { return a->id < b->id; });
  std::string out;
  for (const auto* p : sorted) {
    ojson j;
    j["id"] = p->id;
    j["prompt"] = p->instruction;
    j["chosen"] = p->chosen;
    j["rejected"] = p->rejected;
    out += j.dump();
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace alignmap
