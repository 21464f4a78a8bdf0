#include "alignmap/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/rng.hpp"

namespace alignmap {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

static bool vec_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.size() == 0 || a.cwiseEqual(b).all());
}

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.vectors.size() != b.vectors.size()) return false;
  for (std::size_t i = 0; i < a.vectors.size(); ++i) {
    if (!vec_equal(a.vectors[i], b.vectors[i])) return false;
  }
  if (a.reference.has_value() != b.reference.has_value()) return false;
  return !a.reference || vec_equal(*a.reference, *b.reference);
}

bool operator==(const PreferenceRecord& a, const PreferenceRecord& b) {
  return a.id == b.id && a.instruction == b.instruction && a.responses == b.responses &&
         a.labels == b.labels && a.reference == b.reference && a.embeddings == b.embeddings &&
         a.scores == b.scores;
}

bool operator==(const Corpus& a, const Corpus& b) {
  return a.records == b.records && a.metadata == b.metadata;
}

void validate_record(const PreferenceRecord& rec, std::size_t min_responses) {
  if (rec.id.empty()) throw ValidationError("record with empty id");
  auto fail = [&](const std::string& msg) {
    return ValidationError("record '" + rec.id + "': " + msg);
  };
  const std::size_t n = rec.responses.size();
  if (n < min_responses) {
    throw fail("needs at least " + std::to_string(min_responses) + " responses, got " +
               std::to_string(n));
  }
  if (rec.labels) {
    if (rec.labels->size() != n) {
      throw fail("has " + std::to_string(rec.labels->size()) + " labels for " +
                 std::to_string(n) + " responses");
    }
    for (double y : *rec.labels) {
      if (!std::isfinite(y)) throw fail("non-finite label");
    }
  }
  if (rec.scores) {
    if (rec.scores->size() != n) {
      throw fail("has " + std::to_string(rec.scores->size()) + " scores for " +
                 std::to_string(n) + " responses");
    }
    for (double s : *rec.scores) {
      if (!std::isfinite(s)) throw fail("non-finite score");
    }
  }
  if (rec.embeddings) {
    const auto& emb = *rec.embeddings;
    if (emb.vectors.size() != n) {
      throw fail("has " + std::to_string(emb.vectors.size()) + " embeddings for " +
                 std::to_string(n) + " responses");
    }
    const Eigen::Index dim = emb.vectors.front().size();
    if (dim <= 0) throw fail("embedding dimension must be positive");
    for (const auto& v : emb.vectors) {
      if (v.size() != dim) throw fail("embedding dimension mismatch");
      if (!v.allFinite()) throw fail("non-finite embedding value");
    }
    if (emb.reference) {
      if (emb.reference->size() != dim) throw fail("reference embedding dimension mismatch");
      if (!emb.reference->allFinite()) throw fail("non-finite reference embedding value");
    }
  }
}

static Eigen::VectorXd json_to_vector(const json& arr, const std::string& id,
                                      const char* what) {
  if (!arr.is_array()) {
    throw ValidationError("record '" + id + "': " + what + " must be an array of numbers");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  Eigen::Index i = 0;
  for (const auto& x : arr) {
    if (!x.is_number()) {
      throw ValidationError("record '" + id + "': " + what + " must be an array of numbers");
    }
    v[i++] = x.get<double>();
  }
  return v;
}

static std::vector<double> json_to_numbers(const json& arr, const std::string& id,
                                           const char* what) {
  if (!arr.is_array()) {
    throw ValidationError("record '" + id + "': " + what + " must be an array of numbers");
  }
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& x : arr) {
    if (!x.is_number()) {
      throw ValidationError("record '" + id + "': " + what + " must be an array of numbers");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

static EmbeddingSet parse_embeddings(const json& j, const std::string& id,
                                     bool from_sidecar = false) {
  if (!j.is_object() || !j.contains("vectors")) {
    throw ValidationError("record '" + id + "': embeddings must be {vectors, reference_vector?}");
  }
  // A misspelled key (say "reference" for "reference_vector") would otherwise
  // drop data silently; fail loudly instead.
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (key == "vectors" || key == "reference_vector" || (from_sidecar && key == "id")) continue;
    throw ValidationError("record '" + id + "': unknown embeddings field '" + key +
                          "' (expected vectors, reference_vector)");
  }
  EmbeddingSet emb;
  const auto& vecs = j["vectors"];
  if (!vecs.is_array()) {
    throw ValidationError("record '" + id + "': embeddings.vectors must be an array");
  }
  for (const auto& row : vecs) {
    emb.vectors.push_back(json_to_vector(row, id, "embedding vector"));
  }
  if (j.contains("reference_vector")) {
    emb.reference = json_to_vector(j["reference_vector"], id, "reference_vector");
  }
  return emb;
}

static PreferenceRecord parse_record(const json& j) {
  if (!j.is_object()) throw ValidationError("line is not a JSON object");
  PreferenceRecord rec;
  if (!j.contains("id") || !j["id"].is_string()) {
    throw ValidationError("missing or non-string 'id'");
  }
  rec.id = j["id"].get<std::string>();
  auto fail = [&](const std::string& msg) {
    return ValidationError("record '" + rec.id + "': " + msg);
  };
  if (!j.contains("instruction") || !j["instruction"].is_string()) {
    throw fail("missing or non-string 'instruction'");
  }
  rec.instruction = j["instruction"].get<std::string>();
  if (!j.contains("responses") || !j["responses"].is_array()) {
    throw fail("missing or non-array 'responses'");
  }
  for (const auto& r : j["responses"]) {
    if (!r.is_string()) throw fail("responses must be strings");
    rec.responses.push_back(r.get<std::string>());
  }
  if (j.contains("labels") && !j["labels"].is_null()) {
    rec.labels = json_to_numbers(j["labels"], rec.id, "labels");
  }
  if (j.contains("reference") && !j["reference"].is_null()) {
    if (!j["reference"].is_string()) throw fail("non-string 'reference'");
    rec.reference = j["reference"].get<std::string>();
  }
  if (j.contains("embeddings") && !j["embeddings"].is_null()) {
    rec.embeddings = parse_embeddings(j["embeddings"], rec.id);
  }
  if (j.contains("scores") && !j["scores"].is_null()) {
    rec.scores = json_to_numbers(j["scores"], rec.id, "scores");
  }
  validate_record(rec);
  return rec;
}

static ojson vector_to_json(const Eigen::VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

static ojson record_to_json(const PreferenceRecord& rec) {
  ojson j;
  j["id"] = rec.id;
  j["instruction"] = rec.instruction;
  j["responses"] = rec.responses;
  if (rec.labels) j["labels"] = *rec.labels;
  if (rec.reference) j["reference"] = *rec.reference;
  if (rec.embeddings) {
    ojson e;
    e["vectors"] = ojson::array();
    for (const auto& v : rec.embeddings->vectors) e["vectors"].push_back(vector_to_json(v));
    if (rec.embeddings->reference) {
      e["reference_vector"] = vector_to_json(*rec.embeddings->reference);
    }
    j["embeddings"] = std::move(e);
  }
  if (rec.scores) j["scores"] = *rec.scores;
  return j;
}

static bool parse_meta(const json& j, CorpusMetadata& meta) {
  const auto& m = j["__meta__"];
  if (!m.is_object()) return false;
  if (m.contains("source")) {
    if (!m["source"].is_string()) return false;
    meta.source = m["source"].get<std::string>();
  }
  if (m.contains("score_min")) {
    if (!m["score_min"].is_number()) return false;
    meta.score_min = m["score_min"].get<double>();
  }
  if (m.contains("score_max")) {
    if (!m["score_max"].is_number()) return false;
    meta.score_max = m["score_max"].get<double>();
  }
  if (m.contains("created")) {
    if (!m["created"].is_string()) return false;
    meta.created = m["created"].get<std::string>();
  }
  return true;
}

Corpus load_corpus(const std::filesystem::path& path, bool strict, LoadStats* stats) {
  const std::string text = read_file(path);
  Corpus corpus;
  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  st = LoadStats{};
  std::unordered_set<std::string> seen;
  bool have_meta = false;

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto reject = [&](const std::string& msg) {
    if (strict) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
    }
    ++st.dropped;
    st.issues.push_back("line " + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_object() && j.contains("__meta__") && !have_meta) {
      if (parse_meta(j, corpus.metadata)) {
        have_meta = true;
        continue;  // not a record line
      }
    }
    ++st.total_lines;
    if (j.is_discarded()) {
      reject("malformed JSON");
      continue;
    }
    PreferenceRecord rec;
    try {
      rec = parse_record(j);
    } catch (const ValidationError& e) {
      reject(e.what());
      continue;
    }
    if (!seen.insert(rec.id).second) {
      reject("duplicate id '" + rec.id + "'");
      continue;
    }
    corpus.records.push_back(std::move(rec));
    ++st.kept;
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::string out;
  if (!corpus.metadata.is_default()) {
    ojson m;
    if (!corpus.metadata.source.empty()) m["source"] = corpus.metadata.source;
    if (corpus.metadata.score_min) m["score_min"] = *corpus.metadata.score_min;
    if (corpus.metadata.score_max) m["score_max"] = *corpus.metadata.score_max;
    if (!corpus.metadata.created.empty()) m["created"] = corpus.metadata.created;
    ojson line;
    line["__meta__"] = std::move(m);
    out += line.dump();
    out += '\n';
  }
  for (const auto& rec : corpus.records) {
    out += record_to_json(rec).dump();
    out += '\n';
  }
  atomic_write(path, out);
}

void apply_embedding_sidecar(Corpus& corpus, const std::filesystem::path& path, bool strict,
                             LoadStats* stats) {
  const std::string text = read_file(path);
  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  st = LoadStats{};
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) by_id[corpus.records[i].id] = i;

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto reject = [&](const std::string& msg) {
    if (strict) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
    }
    ++st.dropped;
    st.issues.push_back("line " + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++st.total_lines;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      reject("malformed sidecar entry");
      continue;
    }
    const std::string id = j["id"].get<std::string>();
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      // Sidecars may cover a superset of the corpus; note it, never fail.
      ++st.dropped;
      st.issues.push_back("line " + std::to_string(lineno) + ": unknown id '" + id + "'");
      continue;
    }
    EmbeddingSet emb;
    try {
      emb = parse_embeddings(j, id, /*from_sidecar=*/true);
    } catch (const ValidationError& e) {
      reject(e.what());
      continue;
    }
    PreferenceRecord candidate = corpus.records[it->second];
    candidate.embeddings = std::move(emb);  // sidecar wins over inline embeddings
    try {
      validate_record(candidate);
    } catch (const ValidationError& e) {
      reject(e.what());
      continue;
    }
    corpus.records[it->second] = std::move(candidate);
    ++st.kept;
  }
}

QualityProfile quality_profile_from_string(const std::string& s) {
  if (s == "high") return QualityProfile::High;
  if (s == "low") return QualityProfile::Low;
  if (s == "mixed") return QualityProfile::Mixed;
  throw ValidationError("unknown quality profile '" + s + "' (expected high|low|mixed)");
}

std::string to_string(QualityProfile p) {
  switch (p) {
    case QualityProfile::High: return "high";
    case QualityProfile::Low: return "low";
    case QualityProfile::Mixed: return "mixed";
  }
  return "mixed";
}

Corpus synth_corpus(std::size_t n_records, std::size_t n_responses, QualityProfile profile,
                    std::uint64_t seed) {
  if (n_records < 1) throw ValidationError("synth_corpus: n_records must be >= 1");
  if (n_responses < 2) throw ValidationError("synth_corpus: n_responses must be >= 2");
  Rng rng(seed);
  constexpr Eigen::Index kDim = 8;
  std::vector<std::string> vocab;
  for (int t = 0; t < 12; ++t) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "t%02d", t);
    vocab.emplace_back(buf);
  }
  auto random_unit = [&] {
    Eigen::VectorXd v(kDim);
    do {
      for (Eigen::Index i = 0; i < kDim; ++i) v[i] = rng.normal();
    } while (v.norm() < 1e-9);
    return Eigen::VectorXd(v / v.norm());
  };

  Corpus corpus;
  corpus.metadata.source = "synth";
  corpus.metadata.score_min = 0.0;
  corpus.metadata.score_max = 10.0;
  corpus.records.reserve(n_records);
  for (std::size_t k = 0; k < n_records; ++k) {
    PreferenceRecord rec;
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth-%06zu", k);
    rec.id = buf;
    rec.instruction = "compose a short token sequence for case " + std::to_string(k);
    rec.reference = "reference sequence for case " + std::to_string(k);

    std::vector<double> labels(n_responses);
    if (profile == QualityProfile::Mixed) {
      for (auto& y : labels) y = rng.uniform(0.5, 9.5);
    } else {
      const double m = profile == QualityProfile::High ? rng.uniform(7.5, 9.0)
                                                       : rng.uniform(1.0, 2.5);
      for (auto& y : labels) y = std::clamp(m + 0.2 * rng.normal(), 0.5, 9.5);
    }

    for (std::size_t i = 0; i < n_responses; ++i) {
      const std::size_t len = 4 + rng.index(5);
      std::string text;
      for (std::size_t t = 0; t < len; ++t) {
        if (t) text += ' ';
        text += vocab[rng.index(vocab.size())];
      }
      rec.responses.push_back(std::move(text));
    }

    // Embeddings are constructed so cosine(vector_i, reference) == label_i/10:
    // vector_i = c*u + sqrt(1-c^2)*w with w a unit vector orthogonal to u.
    const Eigen::VectorXd u = random_unit();
    EmbeddingSet emb;
    emb.reference = u;
    for (std::size_t i = 0; i < n_responses; ++i) {
      Eigen::VectorXd w;
      do {
        w = random_unit();
        w -= w.dot(u) * u;
      } while (w.norm() < 1e-9);
      w /= w.norm();
      const double c = labels[i] / 10.0;
      emb.vectors.emplace_back(c * u + std::sqrt(1.0 - c * c) * w);
    }
    rec.embeddings = std::move(emb);
    rec.labels = std::move(labels);
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

}  // namespace alignmap
