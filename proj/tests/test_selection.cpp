#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "alignmap/cartography.hpp"
#include "alignmap/corpus.hpp"
#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/rng.hpp"
#include "alignmap/selection.hpp"
#include "support/temp_dir.hpp"

using namespace alignmap;
using nlohmann::json;

namespace {

struct Fixture {
  Corpus corpus;
  std::vector<ScoredRecord> scored;
  DataMap map;
};

Fixture make_fixture(std::size_t n, std::uint64_t seed) {
  Fixture f;
  f.corpus = synth_corpus(n, 4, QualityProfile::Mixed, seed);
  f.scored = score_corpus(f.corpus, Provider::Precomputed);
  f.map = build_map(f.scored, {0.33, 0.5, 42});
  return f;
}

SelectionSpec spec_of(Strategy s, double ratio = 0.33, std::uint64_t seed = 42) {
  SelectionSpec spec;
  spec.strategy = s;
  spec.ratio = ratio;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("full selection returns every id in corpus order") {
  const auto f = make_fixture(40, 1);
  const auto ids = select(f.map, f.corpus, spec_of(Strategy::Full));
  REQUIRE(ids.size() == 40);
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == f.corpus.records[i].id);
}

TEST_CASE("random selection is seeded, sized by the ceiling rule, and id-valid") {
  const auto f = make_fixture(100, 2);
  const auto a = select(f.map, f.corpus, spec_of(Strategy::Random, 0.33, 42));
  const auto b = select(f.map, f.corpus, spec_of(Strategy::Random, 0.33, 42));
  const auto c = select(f.map, f.corpus, spec_of(Strategy::Random, 0.33, 43));
  CHECK(a.size() == 33);
  CHECK(a == b);
  CHECK(a != c);

  std::set<std::string> valid;
  for (const auto& rec : f.corpus.records) valid.insert(rec.id);
  std::set<std::string> unique(a.begin(), a.end());
  CHECK(unique.size() == a.size());  // no replacement
  for (const auto& id : a) CHECK(valid.count(id) == 1);
}

TEST_CASE("region selection returns region members ranked by the defining statistic") {
  const auto f = make_fixture(100, 3);

  auto region_ids = [&](Region r) {
    std::set<std::string> ids;
    for (const auto& p : f.map.points)
      if (p.region == r) ids.insert(p.id);
    return ids;
  };

  SelectionSpec high_avg = spec_of(Strategy::Region, 0.9);
  high_avg.region = Region::HighAvg;
  const auto ha = select(f.map, f.corpus, high_avg);
  const auto ha_members = region_ids(Region::HighAvg);
  CHECK(ha.size() == ha_members.size());  // ratio larger than the region: whole region
  for (const auto& id : ha) CHECK(ha_members.count(id) == 1);

  // ranking is quality descending
  std::vector<double> qualities;
  for (const auto& id : ha) {
    for (const auto& p : f.map.points)
      if (p.id == id) qualities.push_back(p.quality);
  }
  CHECK(std::is_sorted(qualities.rbegin(), qualities.rend()));

  // small ratio truncates to the top of that ranking
  SelectionSpec trimmed = high_avg;
  trimmed.ratio = 0.05;
  const auto top5 = select(f.map, f.corpus, trimmed);
  REQUIRE(top5.size() == 5);
  for (std::size_t i = 0; i < top5.size(); ++i) CHECK(top5[i] == ha[i]);

  SelectionSpec high_var = spec_of(Strategy::Region, 0.9);
  high_var.region = Region::HighVar;
  const auto hv = select(f.map, f.corpus, high_var);
  std::vector<double> vars;
  for (const auto& id : hv) {
    for (const auto& p : f.map.points)
      if (p.id == id) vars.push_back(p.variability);
  }
  CHECK(std::is_sorted(vars.rbegin(), vars.rend()));

  SelectionSpec low_avg = spec_of(Strategy::Region, 0.9);
  low_avg.region = Region::LowAvg;
  const auto la = select(f.map, f.corpus, low_avg);
  std::vector<double> lows;
  for (const auto& id : la) {
    for (const auto& p : f.map.points)
      if (p.id == id) lows.push_back(p.quality);
  }
  CHECK(std::is_sorted(lows.begin(), lows.end()));  // quality ascending
}

TEST_CASE("the three region selections are pairwise disjoint") {
  const auto f = make_fixture(90, 4);
  std::vector<std::set<std::string>> picks;
  for (Region r : {Region::HighVar, Region::HighAvg, Region::LowAvg}) {
    SelectionSpec spec = spec_of(Strategy::Region, 0.9);
    spec.region = r;
    const auto ids = select(f.map, f.corpus, spec);
    picks.emplace_back(ids.begin(), ids.end());
  }
  for (std::size_t i = 0; i < picks.size(); ++i) {
    for (std::size_t j = i + 1; j < picks.size(); ++j) {
      for (const auto& id : picks[i]) CHECK(picks[j].count(id) == 0);
    }
  }
}

TEST_CASE("quality-only takes the top of the quality ranking corpus-wide") {
  const auto f = make_fixture(100, 5);
  const auto ids = select(f.map, f.corpus, spec_of(Strategy::QualityOnly, 0.1));
  REQUIRE(ids.size() == 10);

  // brute-force oracle: sort all points by quality desc, id asc
  std::vector<MapPoint> pts = f.map.points;
  std::sort(pts.begin(), pts.end(), [](const MapPoint& a, const MapPoint& b) {
    if (a.quality != b.quality) return a.quality > b.quality;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == pts[i].id);
}

TEST_CASE("variability-only takes the calmest records") {
  const auto f = make_fixture(100, 6);
  const auto ids = select(f.map, f.corpus, spec_of(Strategy::VariabilityOnly, 0.1));
  REQUIRE(ids.size() == 10);
  std::vector<MapPoint> pts = f.map.points;
  std::sort(pts.begin(), pts.end(), [](const MapPoint& a, const MapPoint& b) {
    if (a.variability != b.variability) return a.variability < b.variability;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == pts[i].id);
}

TEST_CASE("low-var-no-quality samples half the non-HighVar remainder") {
  const auto f = make_fixture(100, 7);
  const auto ids = select(f.map, f.corpus, spec_of(Strategy::LowVarNoQuality));
  std::set<std::string> high_var;
  for (const auto& p : f.map.points)
    if (p.region == Region::HighVar) high_var.insert(p.id);
  const std::size_t remainder = f.map.points.size() - high_var.size();
  CHECK(ids.size() == (remainder + 1) / 2);
  for (const auto& id : ids) CHECK(high_var.count(id) == 0);
  const auto again = select(f.map, f.corpus, spec_of(Strategy::LowVarNoQuality));
  CHECK(ids == again);
}

TEST_CASE("selection validates ratios, regions, and id agreement") {
  const auto f = make_fixture(10, 8);
  CHECK_THROWS_AS(select(f.map, f.corpus, spec_of(Strategy::Random, 0.0)), ValidationError);
  CHECK_THROWS_AS(select(f.map, f.corpus, spec_of(Strategy::Random, 1.5)), ValidationError);
  CHECK_NOTHROW(select(f.map, f.corpus, spec_of(Strategy::Random, 1.0)));

  SelectionSpec unassigned = spec_of(Strategy::Region);
  unassigned.region = Region::Unassigned;
  CHECK_THROWS_AS(select(f.map, f.corpus, unassigned), ValidationError);

  Corpus other = synth_corpus(10, 4, QualityProfile::Mixed, 999);
  other.records[4].id = "not-in-the-map";
  CHECK_THROWS_AS(select(f.map, other, spec_of(Strategy::Full)), ValidationError);
}

TEST_CASE("pair extraction picks argmax and argmin under each source") {
  PreferenceRecord rec;
  rec.id = "t5";
  rec.instruction = "prompt text";
  rec.responses = {"resp0", "resp1", "resp2", "resp3"};
  rec.labels = std::vector<double>{3.25, 2.75, 3.0, 2.5};

  const TrainingPair by_labels = extract_pair(rec, RankingSource::Labels);
  CHECK(by_labels.chosen_index == 0);
  CHECK(by_labels.rejected_index == 3);
  CHECK(by_labels.chosen == "resp0");
  CHECK(by_labels.rejected == "resp3");
  CHECK(by_labels.instruction == "prompt text");
  CHECK_FALSE(by_labels.tied);
  CHECK(by_labels.source == "labels");

  ScoredRecord scored;
  scored.record = rec;
  scored.provider = Provider::Reference;
  for (double v : {0.22, 1.0, 0.08, 0.11})
    scored.scores.push_back({v, Provider::Reference, std::nullopt});
  const TrainingPair by_scores = extract_pair(scored, RankingSource::AlignmentScores);
  CHECK(by_scores.chosen_index == 1);   // highest alignment score
  CHECK(by_scores.rejected_index == 2); // lowest alignment score
  CHECK(by_scores.chosen == "resp1");
  CHECK(by_scores.rejected == "resp2");
  CHECK(by_scores.source == "alignment_scores");
}

TEST_CASE("all-tied rankings fall back to (0, 1) with the tie flag") {
  PreferenceRecord rec;
  rec.id = "tied";
  rec.instruction = "i";
  rec.responses = {"a", "b"};
  rec.labels = std::vector<double>{5.0, 5.0};
  const TrainingPair pair = extract_pair(rec, RankingSource::Labels);
  CHECK(pair.chosen_index == 0);
  CHECK(pair.rejected_index == 1);
  CHECK(pair.tied);
}

TEST_CASE("chosen always carries the maximum and rejected the minimum") {
  Rng rng(1123);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.index(6);
    PreferenceRecord rec;
    rec.id = "r";
    rec.instruction = "i";
    std::vector<double> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      rec.responses.push_back("resp" + std::to_string(i));
      labels[i] = rng.normal();
    }
    rec.labels = labels;
    const TrainingPair pair = extract_pair(rec, RankingSource::Labels);
    for (double v : labels) {
      CHECK(labels[pair.chosen_index] >= v);
      CHECK(labels[pair.rejected_index] <= v);
    }
    CHECK(pair.chosen_index != pair.rejected_index);
    // first-index tie rule
    for (std::size_t i = 0; i < pair.chosen_index; ++i)
      CHECK(labels[i] < labels[pair.chosen_index]);
  }
}

TEST_CASE("missing ranking sources are typed errors") {
  PreferenceRecord rec;
  rec.id = "nolabels";
  rec.instruction = "i";
  rec.responses = {"a", "b"};
  CHECK_THROWS_AS(extract_pair(rec, RankingSource::Labels), ValidationError);

  ScoredRecord scored;
  scored.record = rec;
  CHECK_THROWS_AS(extract_pair(scored, RankingSource::AlignmentScores), ValidationError);
}

TEST_CASE("extract_pairs filters by id and sorts output by id") {
  const auto f = make_fixture(20, 9);
  const std::vector<std::string> want = {f.corpus.records[7].id, f.corpus.records[2].id,
                                         f.corpus.records[11].id};
  const auto pairs = extract_pairs(f.scored, want, RankingSource::Labels);
  REQUIRE(pairs.size() == 3);
  std::vector<std::string> got;
  for (const auto& p : pairs) got.push_back(p.id);
  auto sorted = want;
  std::sort(sorted.begin(), sorted.end());
  CHECK(got == sorted);

  const auto all = extract_pairs(f.scored, {}, RankingSource::Labels);
  CHECK(all.size() == f.scored.size());

  CHECK_THROWS_AS(extract_pairs(f.scored, {"missing-id"}, RankingSource::Labels),
                  ValidationError);
}

TEST_CASE("pair export writes sorted dpo jsonl") {
  std::vector<TrainingPair> pairs;
  for (const char* id : {"b", "a"}) {
    TrainingPair p;
    p.id = id;
    p.instruction = "inst-" + std::string(id);
    p.chosen = "good";
    p.rejected = "bad";
    pairs.push_back(p);
  }
  TempDir dir;
  const auto path = dir.file("pairs.jsonl");
  export_pairs(pairs, path);
  const std::string text = read_file(path);

  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  REQUIRE(lines.size() == 2);
  const json first = json::parse(lines[0]);
  CHECK(first["id"] == "a");
  CHECK(first["prompt"] == "inst-a");
  CHECK(first["chosen"] == "good");
  CHECK(first["rejected"] == "bad");
  CHECK(json::parse(lines[1])["id"] == "b");

  // exact field order for byte-stable output
  CHECK(lines[0].rfind("{\"id\":", 0) == 0);

  const auto path2 = dir.file("pairs2.jsonl");
  export_pairs(pairs, path2);
  CHECK(file_digest(path) == file_digest(path2));

  CHECK_THROWS_AS(export_pairs({}, dir.file("empty.jsonl")), ValidationError);
}

TEST_CASE("strategy and ranking-source names round-trip") {
  for (Strategy s : {Strategy::Region, Strategy::Random, Strategy::Full, Strategy::QualityOnly,
                     Strategy::VariabilityOnly, Strategy::LowVarNoQuality}) {
    CHECK(strategy_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(strategy_from_string("best"), ValidationError);
  CHECK(ranking_source_from_string("labels") == RankingSource::Labels);
  CHECK(ranking_source_from_string("alignment_scores") == RankingSource::AlignmentScores);
  CHECK(ranking_source_from_string("alignment-scores") == RankingSource::AlignmentScores);
  CHECK(ranking_source_from_string("scores") == RankingSource::AlignmentScores);
  CHECK_THROWS_AS(ranking_source_from_string("votes"), ValidationError);
}
