#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "alignmap/corpus.hpp"
#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/math.hpp"
#include "alignmap/rng.hpp"
#include "alignmap/scoring.hpp"
#include "support/temp_dir.hpp"

using namespace alignmap;

namespace {

PreferenceRecord basic_record(std::string id, std::vector<double> labels) {
  PreferenceRecord rec;
  rec.id = std::move(id);
  rec.instruction = "inst";
  rec.responses.assign(labels.size(), "resp");
  rec.labels = std::move(labels);
  return rec;
}

PreferenceRecord embedded_record(std::string id, std::vector<Eigen::VectorXd> vecs,
                                 Eigen::VectorXd ref) {
  PreferenceRecord rec;
  rec.id = std::move(id);
  rec.instruction = "inst";
  rec.responses.assign(vecs.size(), "resp");
  EmbeddingSet emb;
  emb.vectors = std::move(vecs);
  emb.reference = std::move(ref);
  rec.embeddings = emb;
  return rec;
}

}  // namespace

TEST_CASE("precomputed scoring copies label values verbatim") {
  const auto rec = basic_record("u1", {3.25, 2.75, 3.0, 2.5});
  const ScoredRecord scored = score_precomputed(rec);
  CHECK(scored.provider == Provider::Precomputed);
  REQUIRE(scored.scores.size() == 4);
  CHECK(scored.scores[0].value == 3.25);
  CHECK(scored.scores[1].value == 2.75);
  CHECK(scored.scores[2].value == 3.0);
  CHECK(scored.scores[3].value == 2.5);
  for (const auto& s : scored.scores) CHECK(s.provider == Provider::Precomputed);
}

TEST_CASE("precomputed scoring prefers an explicit scores field over labels") {
  auto rec = basic_record("u2", {1.0, 2.0});
  rec.scores = std::vector<double>{0.5, 0.25};
  const ScoredRecord scored = score_precomputed(rec);
  CHECK(scored.scores[0].value == 0.5);
  CHECK(scored.scores[1].value == 0.25);
}

TEST_CASE("precomputed scoring passes through zeros and rejects missing sources") {
  const ScoredRecord zeros = score_precomputed(basic_record("z", {0.0, 0.0, 0.0}));
  for (const auto& s : zeros.scores) CHECK(s.value == 0.0);

  PreferenceRecord bare;
  bare.id = "no-labels";
  bare.instruction = "i";
  bare.responses = {"a", "b"};
  CHECK_THROWS_AS(score_precomputed(bare), ValidationError);
  try {
    score_precomputed(bare);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("no-labels") != std::string::npos);
  }
}

TEST_CASE("reference scoring computes cosine against the reference embedding") {
  Eigen::VectorXd ref(2);
  ref << 1.0, 0.0;
  Eigen::VectorXd same = ref;
  Eigen::VectorXd orth(2);
  orth << 0.0, 1.0;
  Eigen::VectorXd diag(2);
  diag << 1.0, 1.0;

  const auto rec = embedded_record("e1", {same, orth, diag}, ref);
  const ScoredRecord scored = score_reference(rec);
  CHECK(scored.provider == Provider::Reference);
  CHECK(scored.scores[0].value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(scored.scores[1].value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(scored.scores[2].value == doctest::Approx(0.70710678118654752).epsilon(1e-9));
}

TEST_CASE("reference scoring is symmetric and scale invariant") {
  Rng rng(321);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd a(5), b(5);
    for (int d = 0; d < 5; ++d) {
      a[d] = rng.normal();
      b[d] = rng.normal();
    }
    const double ab = cosine_similarity(a, b);
    const double ba = cosine_similarity(b, a);
    CHECK(ab == ba);
    const double scale = rng.uniform() * 10.0 + 0.01;
    CHECK(cosine_similarity(a * scale, b) == doctest::Approx(ab).epsilon(1e-12));
    CHECK(cosine_similarity(a, b * scale) == doctest::Approx(ab).epsilon(1e-12));
  }
}

TEST_CASE("reference scoring errors name the record and the zero-norm vector") {
  Eigen::VectorXd ref(2);
  ref << 1.0, 0.0;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd ok(2);
  ok << 1.0, 1.0;

  const auto rec = embedded_record("zed", {ok, zero}, ref);
  try {
    score_reference(rec);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("zed") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }

  const auto zero_ref = embedded_record("zref", {ok, ok}, zero);
  CHECK_THROWS_AS(score_reference(zero_ref), ValidationError);

  PreferenceRecord none;
  none.id = "none";
  none.instruction = "i";
  none.responses = {"a", "b"};
  CHECK_THROWS_AS(score_reference(none), ValidationError);
}

TEST_CASE("every scored record carries exactly one finite score per response") {
  const Corpus corpus = synth_corpus(64, 5, QualityProfile::Mixed, 17);
  const auto scored = score_corpus(corpus, Provider::Reference);
  REQUIRE(scored.size() == corpus.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    CHECK(scored[i].scores.size() == corpus.records[i].responses.size());
    for (const auto& s : scored[i].scores) CHECK(std::isfinite(s.value));
  }
}

TEST_CASE("normalize none returns the input unchanged") {
  std::vector<ScoredRecord> scored = {score_precomputed(basic_record("a", {2.0, 4.0}))};
  const auto out = normalize_scores(scored, NormalizeMethod::None);
  CHECK(out[0].scores[0].value == 2.0);
  CHECK(out[0].scores[1].value == 4.0);
}

TEST_CASE("minmax maps the corpus extremes to 0 and 1") {
  std::vector<ScoredRecord> scored = {score_precomputed(basic_record("a", {2.0, 4.0}))};
  const auto out = normalize_scores(scored, NormalizeMethod::Minmax);
  CHECK(out[0].scores[0].value == 0.0);
  CHECK(out[0].scores[1].value == 1.0);

  // extremes are corpus-wide, not per record
  std::vector<ScoredRecord> two = {score_precomputed(basic_record("a", {2.0, 3.0})),
                                   score_precomputed(basic_record("b", {4.0, 6.0}))};
  const auto wide = normalize_scores(two, NormalizeMethod::Minmax);
  CHECK(wide[0].scores[0].value == 0.0);
  CHECK(wide[0].scores[1].value == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(wide[1].scores[1].value == 1.0);
}

TEST_CASE("zscore outputs have mean 0 and population std 1") {
  std::vector<ScoredRecord> scored = {score_precomputed(basic_record("a", {1.0, 2.0})),
                                      score_precomputed(basic_record("b", {3.0, 4.0}))};
  const auto out = normalize_scores(scored, NormalizeMethod::Zscore);
  std::vector<double> values;
  for (const auto& rec : out)
    for (const auto& s : rec.scores) values.push_back(s.value);
  const double m =
      mean(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
  double var = 0.0;
  for (double v : values) var += (v - m) * (v - m);
  var /= static_cast<double>(values.size());
  CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("degenerate corpora normalize to the documented constants") {
  std::vector<ScoredRecord> scored = {score_precomputed(basic_record("a", {5.0, 5.0})),
                                      score_precomputed(basic_record("b", {5.0, 5.0}))};
  const auto mm = normalize_scores(scored, NormalizeMethod::Minmax);
  const auto zs = normalize_scores(scored, NormalizeMethod::Zscore);
  for (const auto& rec : mm)
    for (const auto& s : rec.scores) CHECK(s.value == 0.5);
  for (const auto& rec : zs)
    for (const auto& s : rec.scores) CHECK(s.value == 0.0);
}

TEST_CASE("normalization preserves within-record ranking") {
  const Corpus corpus = synth_corpus(40, 6, QualityProfile::Mixed, 23);
  const auto scored = score_corpus(corpus, Provider::Precomputed);
  for (NormalizeMethod m : {NormalizeMethod::Minmax, NormalizeMethod::Zscore}) {
    const auto out = normalize_scores(scored, m);
    for (std::size_t r = 0; r < scored.size(); ++r) {
      for (std::size_t i = 0; i < scored[r].scores.size(); ++i) {
        for (std::size_t j = i + 1; j < scored[r].scores.size(); ++j) {
          const double din = scored[r].scores[i].value - scored[r].scores[j].value;
          const double dout = out[r].scores[i].value - out[r].scores[j].value;
          if (din > 0) CHECK(dout > 0);
          if (din < 0) CHECK(dout < 0);
          if (din == 0) CHECK(dout == 0);
        }
      }
    }
  }
}

TEST_CASE("score files round-trip through the sidecar format") {
  const Corpus corpus = synth_corpus(25, 4, QualityProfile::Mixed, 31);
  const auto scored = score_corpus(corpus, Provider::Reference);
  TempDir dir;
  const auto path = dir.file("scores.jsonl");
  write_scores(scored, path);
  const auto loaded = load_scores(corpus, path);
  REQUIRE(loaded.size() == scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    CHECK(loaded[i].record.id == scored[i].record.id);
    CHECK(loaded[i].provider == scored[i].provider);
    for (std::size_t j = 0; j < scored[i].scores.size(); ++j) {
      CHECK(loaded[i].scores[j].value == scored[i].scores[j].value);
    }
  }

  // two writes of the same scores are byte-identical
  const auto path2 = dir.file("scores2.jsonl");
  write_scores(scored, path2);
  CHECK(file_digest(path) == file_digest(path2));
}

TEST_CASE("loading scores demands full coverage and matching counts") {
  const Corpus corpus = synth_corpus(4, 3, QualityProfile::Mixed, 3);
  const auto scored = score_corpus(corpus, Provider::Precomputed);
  TempDir dir;

  // coverage: drop one record from the file
  const auto partial = dir.file("partial.jsonl");
  std::vector<ScoredRecord> fewer(scored.begin(), scored.end() - 1);
  write_scores(fewer, partial);
  CHECK_THROWS_AS(load_scores(corpus, partial), ValidationError);

  // count mismatch inside a record
  const auto mangled = dir.file("mangled.jsonl");
  auto broken = scored;
  broken[0].scores.pop_back();
  write_scores(broken, mangled);
  CHECK_THROWS_AS(load_scores(corpus, mangled), ValidationError);
}

TEST_CASE("provider and normalize names round-trip") {
  for (Provider p :
       {Provider::Precomputed, Provider::Reference, Provider::Judge, Provider::Reward}) {
    CHECK(provider_from_string(to_string(p)) == p);
  }
  CHECK_THROWS_AS(provider_from_string("oracle"), ValidationError);
  for (NormalizeMethod m : {NormalizeMethod::None, NormalizeMethod::Minmax, NormalizeMethod::Zscore}) {
    CHECK(normalize_method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(normalize_method_from_string("quantile"), ValidationError);
}
