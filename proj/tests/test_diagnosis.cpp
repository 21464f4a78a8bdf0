#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "alignmap/corpus.hpp"
#include "alignmap/diagnosis.hpp"
#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/rng.hpp"
#include "alignmap/scoring.hpp"
#include "support/temp_dir.hpp"

using namespace alignmap;

namespace {

ScoredRecord labeled_scored(std::string id, std::vector<double> labels,
                            std::vector<double> scores) {
  ScoredRecord s;
  s.record.id = std::move(id);
  s.record.instruction = "i";
  s.record.responses.assign(labels.size(), "r");
  s.record.labels = std::move(labels);
  s.provider = Provider::Precomputed;
  for (double v : scores) s.scores.push_back({v, Provider::Precomputed, std::nullopt});
  return s;
}

double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TEST_CASE("correlation reproduces the documented example value") {
  const auto rec = labeled_scored("t5", {3.25, 2.75, 3.0, 2.5}, {0.22, 1.0, 0.08, 0.11});
  const auto report = correlation(rec);
  REQUIRE(report.defined());
  CHECK(*report.s_corr == doctest::Approx(0.667).epsilon(0.0075));  // 0.667 +/- 0.005
  CHECK(std::abs(*report.s_corr - 0.667) < 0.005);
  CHECK(*report.s_corr ==
        doctest::Approx(oracle_cosine({3.25, 2.75, 3.0, 2.5}, {0.22, 1.0, 0.08, 0.11}))
            .epsilon(1e-14));
}

TEST_CASE("proportional labels and scores correlate perfectly") {
  for (double c : {0.5, 1.0, 2.0, 117.0}) {
    std::vector<double> s = {0.2, 0.9, 0.4, 0.6};
    std::vector<double> y;
    for (double v : s) y.push_back(c * v);
    const auto report = correlation(labeled_scored("p", y, s));
    REQUIRE(report.defined());
    CHECK(*report.s_corr == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("zero vectors yield undefined reports with the matching flag") {
  const auto zscore = correlation(labeled_scored("zs", {1.0, 2.0}, {0.0, 0.0}));
  CHECK_FALSE(zscore.defined());
  CHECK(zscore.zero_score_vector);
  CHECK_FALSE(zscore.zero_label_vector);

  const auto zlabel = correlation(labeled_scored("zl", {0.0, 0.0}, {1.0, 2.0}));
  CHECK_FALSE(zlabel.defined());
  CHECK(zlabel.zero_label_vector);
  CHECK_FALSE(zlabel.zero_score_vector);

  const auto zboth = correlation(labeled_scored("zb", {0.0, 0.0}, {0.0, 0.0}));
  CHECK_FALSE(zboth.defined());
  CHECK(zboth.zero_label_vector);
  CHECK(zboth.zero_score_vector);
}

TEST_CASE("correlation without labels is an error naming the id") {
  ScoredRecord s;
  s.record.id = "lbl-less";
  s.record.instruction = "i";
  s.record.responses = {"a", "b"};
  s.scores = {{1.0, Provider::Precomputed, std::nullopt},
              {2.0, Provider::Precomputed, std::nullopt}};
  try {
    correlation(s);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("lbl-less") != std::string::npos);
  }
}

TEST_CASE("scaling either vector by powers of two leaves s_corr bit-identical") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> y(5), s(5);
    for (int i = 0; i < 5; ++i) {
      y[i] = rng.normal();
      s[i] = rng.normal();
    }
    const auto base = correlation(labeled_scored("b", y, s));
    REQUIRE(base.defined());
    for (double c : {2.0, 0.25, 1024.0}) {
      std::vector<double> yc, sc;
      for (double v : y) yc.push_back(c * v);
      for (double v : s) sc.push_back(c * v);
      const auto ylab = correlation(labeled_scored("b", yc, s));
      const auto sscal = correlation(labeled_scored("b", y, sc));
      CHECK(*ylab.s_corr == *base.s_corr);    // bit-exact: power-of-two scaling
      CHECK(*sscal.s_corr == *base.s_corr);
    }
    // arbitrary positive factors stay within float-rounding distance
    const auto odd = correlation(labeled_scored("b", y, [&] {
      std::vector<double> sc;
      for (double v : s) sc.push_back(3.7 * v);
      return sc;
    }()));
    CHECK(*odd.s_corr == doctest::Approx(*base.s_corr).epsilon(1e-14));
  }
}

TEST_CASE("negating the score vector negates the correlation") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> y(4), s(4);
    for (int i = 0; i < 4; ++i) {
      y[i] = rng.normal() + 2.0;
      s[i] = rng.normal();
    }
    const auto pos = correlation(labeled_scored("x", y, s));
    std::vector<double> neg;
    for (double v : s) neg.push_back(-v);
    const auto flip = correlation(labeled_scored("x", y, neg));
    CHECK(*flip.s_corr == doctest::Approx(-*pos.s_corr).epsilon(1e-14));
  }
}

TEST_CASE("correlation stays within [-1, 1] up to rounding") {
  Rng rng(2718);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(6));
    std::vector<double> y(n), s(n);
    for (int i = 0; i < n; ++i) {
      y[i] = rng.normal() * std::pow(10.0, static_cast<double>(rng.index(7)) - 3.0);
      s[i] = rng.normal();
    }
    const auto report = correlation(labeled_scored("r", y, s));
    if (!report.defined()) continue;
    CHECK(*report.s_corr <= 1.0 + 1e-12);
    CHECK(*report.s_corr >= -1.0 - 1e-12);
  }
}

TEST_CASE("correlation matches brute force over all label permutations") {
  // n=4: check every permutation of the labels against a fixed score vector
  const std::vector<double> y = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> s = {0.3, 0.1, 0.9, 0.5};
  std::vector<double> perm = y;
  std::sort(perm.begin(), perm.end());
  do {
    const auto report = correlation(labeled_scored("perm", perm, s));
    CHECK(*report.s_corr == doctest::Approx(oracle_cosine(perm, s)).epsilon(1e-14));
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("diagnose annotates regions from a map and keeps corpus order") {
  const Corpus corpus = synth_corpus(60, 4, QualityProfile::Mixed, 13);
  const auto scored = score_corpus(corpus, Provider::Reference);
  const DataMap map = build_map(scored, {0.33, 0.5, 42});
  const auto reports = diagnose(scored, &map);
  REQUIRE(reports.size() == scored.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(reports[i].id == scored[i].record.id);
    CHECK(reports[i].region == map.points[i].region);
  }
  const auto bare = diagnose(scored, nullptr);
  for (const auto& r : bare) CHECK(r.region == Region::Unassigned);
}

TEST_CASE("tail selection takes ceil(q*N) defined ids from the right end") {
  std::vector<CorrelationReport> reports;
  for (int i = 0; i < 100; ++i) {
    CorrelationReport r;
    r.id = (i < 10 ? "r0" : "r") + std::to_string(i);
    r.s_corr = 0.01 * i;  // strictly increasing in i
    reports.push_back(r);
  }
  const auto top = select_by_correlation(reports, 0.01, Tail::Top);
  REQUIRE(top.size() == 1);
  CHECK(top[0] == "r99");
  const auto bottom = select_by_correlation(reports, 0.01, Tail::Bottom);
  REQUIRE(bottom.size() == 1);
  CHECK(bottom[0] == "r00");

  const auto top5 = select_by_correlation(reports, 0.05, Tail::Top);
  CHECK(top5 == std::vector<std::string>{"r99", "r98", "r97", "r96", "r95"});
}

TEST_CASE("tail selection excludes undefined reports and breaks ties by id") {
  std::vector<CorrelationReport> reports;
  for (const char* id : {"d", "b", "e", "a", "c"}) {
    CorrelationReport r;
    r.id = id;
    r.s_corr = 0.5;  // all tied
    reports.push_back(r);
  }
  CorrelationReport undefined_r;
  undefined_r.id = "zz";
  undefined_r.zero_score_vector = true;
  reports.push_back(undefined_r);

  // N_defined = 5, ceil(0.5*5) = 3; ties resolve alphabetically
  const auto picked = select_by_correlation(reports, 0.5, Tail::Top);
  CHECK(picked == std::vector<std::string>{"a", "b", "c"});

  CHECK_THROWS_AS(select_by_correlation(reports, 0.0, Tail::Top), ValidationError);
  CHECK_THROWS_AS(select_by_correlation(reports, 1.0, Tail::Top), ValidationError);
  std::vector<CorrelationReport> none = {undefined_r};
  CHECK_THROWS_AS(select_by_correlation(none, 0.5, Tail::Top), ValidationError);
}

TEST_CASE("corrupting labels is caught by the bottom correlation tail") {
  // high-quality corpus: scores echo labels, so S_corr is near 1 everywhere.
  const Corpus corpus = synth_corpus(400, 4, QualityProfile::Mixed, 42);
  auto records = corpus.records;

  // corrupt 5%: rotate the labels of every 20th record so ranks invert
  std::set<std::string> corrupted;
  for (std::size_t i = 0; i < records.size(); i += 20) {
    auto& labels = *records[i].labels;
    std::reverse(labels.begin(), labels.end());
    corrupted.insert(records[i].id);
  }

  Corpus mutated;
  mutated.records = records;
  const auto scored = score_corpus(mutated, Provider::Reference);
  const auto reports = diagnose(scored);
  const auto bottom = select_by_correlation(reports, 0.10, Tail::Bottom);

  std::size_t caught = 0;
  for (const auto& id : bottom) {
    if (corrupted.count(id)) ++caught;
  }
  CHECK(caught >= (corrupted.size() * 9) / 10);  // >= 90% of corruptions detected
}

TEST_CASE("relabeling from scores redirects pair extraction") {
  const auto rec = labeled_scored("t5", {3.25, 2.75, 3.0, 2.5}, {0.22, 1.0, 0.08, 0.11});
  const PreferenceRecord relabeled = relabel_from_scores(rec);
  REQUIRE(relabeled.labels.has_value());
  CHECK((*relabeled.labels)[0] == 0.22);
  CHECK((*relabeled.labels)[1] == 1.0);
  const auto best = std::max_element(relabeled.labels->begin(), relabeled.labels->end());
  CHECK(best - relabeled.labels->begin() == 1);
}

TEST_CASE("diagnosis csv marks undefined rows and joins flags") {
  std::vector<CorrelationReport> reports;
  CorrelationReport ok;
  ok.id = "fine";
  ok.s_corr = 0.25;
  ok.region = Region::HighAvg;
  reports.push_back(ok);
  CorrelationReport bad;
  bad.id = "broken";
  bad.zero_label_vector = true;
  bad.zero_score_vector = true;
  reports.push_back(bad);

  TempDir dir;
  const auto path = dir.file("diag.csv");
  write_diagnosis_csv(reports, path);
  const std::string text = read_file(path);
  CHECK(text.rfind("id,s_corr,region,flags\n", 0) == 0);
  CHECK(text.find("fine,0.25,HighAvg,\n") != std::string::npos);
  CHECK(text.find("broken,,Unassigned,zero-label-vector|zero-score-vector\n") !=
        std::string::npos);
}

TEST_CASE("id lists write one id per line in order") {
  TempDir dir;
  const auto path = dir.file("ids.txt");
  write_id_list({"b", "a", "c"}, path);
  CHECK(read_file(path) == "b\na\nc\n");
}
