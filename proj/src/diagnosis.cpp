#include "alignmap/diagnosis.hpp"

#include <algorithm>
#include <unordered_map>

#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/math.hpp"

namespace alignmap {

CorrelationReport correlation(const ScoredRecord& scored) {
  const auto& rec = scored.record;
  if (!rec.labels) {
    throw ValidationError("record '" + rec.id + "': correlation needs labels");
  }
  if (rec.labels->size() != scored.scores.size()) {
    throw ValidationError("record '" + rec.id + "': label count " +
                          std::to_string(rec.labels->size()) + " != score count " +
                          std::to_string(scored.scores.size()));
  }
  CorrelationReport report;
  report.id = rec.id;
  const Eigen::Map<const Eigen::VectorXd> y(rec.labels->data(),
                                            static_cast<Eigen::Index>(rec.labels->size()));
  const Eigen::VectorXd s = scored.score_values();
  report.zero_label_vector = y.norm() == 0.0;
  report.zero_score_vector = s.norm() == 0.0;
  if (!report.zero_label_vector && !report.zero_score_vector) {
    report.s_corr = y.dot(s) / (y.norm() * s.norm());
  }
  return report;
}

std::vector<CorrelationReport> diagnose(const std::vector<ScoredRecord>& scored,
                                        const DataMap* map) {
  std::unordered_map<std::string, Region> regions;
  if (map) {
    for (const auto& p : map->points) regions[p.id] = p.region;
  }
  std::vector<CorrelationReport> reports;
  reports.reserve(scored.size());
  for (const auto& sr : scored) {
    CorrelationReport report = correlation(sr);
    if (map) {
      const auto it = regions.find(report.id);
      if (it != regions.end()) report.region = it->second;
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<std::string> select_by_correlation(const std::vector<CorrelationReport>& reports,
                                               double q, Tail end) {
  if (q <= 0.0 || q >= 1.0) throw ValidationError("correlation tail fraction must be in (0, 1)");
  std::vector<const CorrelationReport*> defined;
  for (const auto& r : reports) {
    if (r.defined()) defined.push_back(&r);
  }
  if (defined.empty()) throw ValidationError("no defined correlations to rank");
  std::sort(defined.begin(), defined.end(),
            [&](const CorrelationReport* a, const CorrelationReport* b) {
              if (*a->s_corr != *b->s_corr) {
                return end == Tail::Top ? *a->s_corr > *b->s_corr : *a->s_corr < *b->s_corr;
              }
              return a->id < b->id;
            });
  const std::size_t k = count_ceil(q, defined.size());
  std::vector<std::string> ids;
  ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) ids.push_back(defined[i]->id);
  return ids;
}

PreferenceRecord relabel_from_scores(const ScoredRecord& scored) {
  if (scored.scores.size() < 2) {
    throw ValidationError("record '" + scored.record.id + "': needs at least 2 scores");
  }
  PreferenceRecord rec = scored.record;
  std::vector<double> labels;
  labels.reserve(scored.scores.size());
  for (const auto& s : scored.scores) labels.push_back(s.value);
  rec.labels = std::move(labels);
  return rec;
}

void write_diagnosis_csv(const std::vector<CorrelationReport>& reports,
                         const std::filesystem::path& path) {
  std::string out = "id,s_corr,region,flags\n";
  for (const auto& r : reports) {
    out += r.id;
    out += ',';
    if (r.defined()) out += fmt_double(*r.s_corr);
    out += ',';
    out += to_string(r.region);
    out += ',';
    std::string flags;
    if (r.zero_label_vector) flags = "zero-label-vector";
    if (r.zero_score_vector) {
      if (!flags.empty()) flags += '|';
      flags += "zero-score-vector";
    }
    out += flags;
    out += '\n';
  }
  atomic_write(path, out);
}

void write_id_list(const std::vector<std::string>& ids, const std::filesystem::path& path) {
  std::string out;
  for (const auto& id : ids) {
    out += id;
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace alignmap
