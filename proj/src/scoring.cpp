#include "alignmap/scoring.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/math.hpp"

namespace alignmap {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string to_string(Provider p) {
  switch (p) {
    case Provider::Precomputed: return "precomputed";
    case Provider::Reference: return "reference";
    case Provider::Judge: return "judge";
    case Provider::Reward: return "reward";
  }
  return "precomputed";
}

Provider provider_from_string(const std::string& s) {
  if (s == "precomputed") return Provider::Precomputed;
  if (s == "reference") return Provider::Reference;
  if (s == "judge") return Provider::Judge;
  if (s == "reward") return Provider::Reward;
  throw ValidationError("unknown provider '" + s +
                        "' (expected precomputed|reference|judge|reward)");
}

Eigen::VectorXd ScoredRecord::score_values() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(scores.size()));
  for (std::size_t i = 0; i < scores.size(); ++i) v[static_cast<Eigen::Index>(i)] = scores[i].value;
  return v;
}

ScoredRecord score_precomputed(const PreferenceRecord& rec) {
  validate_record(rec, 1);
  const std::vector<double>* src = nullptr;
  if (rec.scores) {
    src = &*rec.scores;
  } else if (rec.labels) {
    src = &*rec.labels;
  } else {
    throw ValidationError("record '" + rec.id + "': no precomputed scores or labels");
  }
  ScoredRecord out{rec, {}, Provider::Precomputed};
  out.scores.reserve(src->size());
  for (double v : *src) out.scores.push_back({v, Provider::Precomputed, std::nullopt});
  return out;
}

ScoredRecord score_reference(const PreferenceRecord& rec) {
  validate_record(rec, 1);
  if (!rec.embeddings || !rec.embeddings->reference) {
    throw ValidationError("record '" + rec.id +
                          "': reference scoring needs embeddings and a reference vector");
  }
  const Eigen::VectorXd& ref = *rec.embeddings->reference;
  if (ref.norm() == 0.0) {
    throw ValidationError("record '" + rec.id + "': zero-norm reference embedding");
  }
  ScoredRecord out{rec, {}, Provider::Reference};
  out.scores.reserve(rec.embeddings->vectors.size());
  for (std::size_t i = 0; i < rec.embeddings->vectors.size(); ++i) {
    const auto c = try_cosine(rec.embeddings->vectors[i], ref);
    if (!c) {
      throw ValidationError("record '" + rec.id + "': zero-norm embedding at response " +
                            std::to_string(i));
    }
    out.scores.push_back({*c, Provider::Reference, std::nullopt});
  }
  return out;
}

std::vector<ScoredRecord> score_corpus(const Corpus& corpus, Provider provider,
                                       const EndpointConfig* cfg) {
  std::vector<ScoredRecord> out;
  out.reserve(corpus.records.size());
  for (const auto& rec : corpus.records) {
    switch (provider) {
      case Provider::Precomputed:
        out.push_back(score_precomputed(rec));
        break;
      case Provider::Reference:
        out.push_back(score_reference(rec));
        break;
      case Provider::Judge:
      case Provider::Reward:
        if (!cfg) {
          throw ValidationError("endpoint configuration required for " + to_string(provider) +
                                " scoring");
        }
        out.push_back(provider == Provider::Judge ? score_judge(rec, *cfg)
                                                  : score_reward(rec, *cfg));
        break;
    }
  }
  return out;
}

NormalizeMethod normalize_method_from_string(const std::string& s) {
  if (s == "none") return NormalizeMethod::None;
  if (s == "minmax") return NormalizeMethod::Minmax;
  if (s == "zscore") return NormalizeMethod::Zscore;
  throw ValidationError("unknown normalize method '" + s + "' (expected none|minmax|zscore)");
}

std::string to_string(NormalizeMethod m) {
  switch (m) {
    case NormalizeMethod::None: return "none";
    case NormalizeMethod::Minmax: return "minmax";
    case NormalizeMethod::Zscore: return "zscore";
  }
  return "none";
}

std::vector<ScoredRecord> normalize_scores(std::vector<ScoredRecord> scored,
                                           NormalizeMethod method) {
  if (method == NormalizeMethod::None) return scored;
  if (scored.empty()) throw ValidationError("normalize_scores: need at least one record");

  std::size_t count = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& sr : scored) {
    for (const auto& s : sr.scores) {
      lo = std::min(lo, s.value);
      hi = std::max(hi, s.value);
      sum += s.value;
      ++count;
    }
  }
  if (count == 0) throw ValidationError("normalize_scores: no scores present");
  const double mu = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const auto& sr : scored) {
    for (const auto& s : sr.scores) ss += (s.value - mu) * (s.value - mu);
  }
  const double sd = std::sqrt(ss / static_cast<double>(count));

  for (auto& sr : scored) {
    for (auto& s : sr.scores) {
      if (method == NormalizeMethod::Minmax) {
        s.value = hi == lo ? 0.5 : (s.value - lo) / (hi - lo);
      } else {
        s.value = sd == 0.0 ? 0.0 : (s.value - mu) / sd;
      }
    }
  }
  return scored;
}

void write_scores(const std::vector<ScoredRecord>& scored, const std::filesystem::path& path) {
  std::string out;
  for (const auto& sr : scored) {
    ojson j;
    j["id"] = sr.record.id;
    j["provider"] = to_string(sr.provider);
    ojson vals = ojson::array();
    for (const auto& s : sr.scores) vals.push_back(s.value);
    j["values"] = std::move(vals);
    out += j.dump();
    out += '\n';
  }
  atomic_write(path, out);
}

std::vector<ScoredRecord> load_scores(const Corpus& corpus, const std::filesystem::path& path) {
  const std::string text = read_file(path);
  struct Row {
    Provider provider;
    std::vector<double> values;
  };
  std::unordered_map<std::string, Row> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("provider") || !j["provider"].is_string() || !j.contains("values") ||
        !j["values"].is_array()) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": malformed scores entry");
    }
    Row row;
    row.provider = provider_from_string(j["provider"].get<std::string>());
    for (const auto& v : j["values"]) {
      if (!v.is_number()) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                              ": non-numeric score value");
      }
      row.values.push_back(v.get<double>());
    }
    rows[j["id"].get<std::string>()] = std::move(row);
  }

  std::vector<ScoredRecord> out;
  out.reserve(corpus.records.size());
  for (const auto& rec : corpus.records) {
    const auto it = rows.find(rec.id);
    if (it == rows.end()) {
      throw ValidationError("no scores for record '" + rec.id + "' in " + path.string());
    }
    if (it->second.values.size() != rec.responses.size()) {
      throw ValidationError("record '" + rec.id + "': scores file has " +
                            std::to_string(it->second.values.size()) + " values for " +
                            std::to_string(rec.responses.size()) + " responses");
    }
    ScoredRecord sr{rec, {}, it->second.provider};
    for (double v : it->second.values) {
      if (!std::isfinite(v)) {
        throw ValidationError("record '" + rec.id + "': non-finite score in " + path.string());
      }
      sr.scores.push_back({v, it->second.provider, std::nullopt});
    }
    out.push_back(std::move(sr));
  }
  return out;
}

}  // namespace alignmap
