#include "lmk/cleaning.h"

#include <unordered_set>

#include "lmk/knn.h"
#include "lmk/util.h"

namespace lmk {

void CleaningConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "cleaning: k must be >= 1");
  if (verify_cap < 1) {
    throw Error(ErrorCode::kInvalidConfig, "cleaning: verify_cap must be >= 1");
  }
  ransac.validate();
}

std::vector<std::string> CleaningReport::kept_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : records) {
    if (r.kept) ids.push_back(r.id);
  }
  return ids;
}

std::vector<std::string> CleaningReport::kept_ids_at(std::size_t t) const {
  std::vector<std::string> ids;
  for (const auto& r : records) {
    if (r.verified > t) ids.push_back(r.id);
  }
  return ids;
}

CleaningReport clean_train_set(const DescriptorMatrix& train,
                               const LabelTable& labels,
                               const LocalFeatureSet& features,
                               const CleaningConfig& cfg) {
  cfg.validate();
  CleaningReport report;
  report.t_frequency = cfg.t_frequency;
  report.records.resize(train.rows());
  for (std::size_t i = 0; i < train.rows(); ++i) {
    report.records[i].id = train.id(i);
    report.records[i].label = labels.at(train.id(i));
    features.at(train.id(i));
  }
  if (train.empty()) return report;

  const int threads = resolve_threads(cfg.threads);
  SearchOptions search;
  search.exclude_self = true;
  search.threads = threads;
  const auto neighbors = knn_search(train, train, cfg.k, search);

  // Flatten (source, target) verification jobs so they can run in parallel;
  // counts are aggregated afterwards, so scheduling cannot affect them.
  struct Job {
    std::size_t source;
    std::size_t target;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < train.rows(); ++i) {
    auto& rec = report.records[i];
    for (const auto& n : neighbors[i].neighbors) {
      if (report.records[n.index].label != rec.label) continue;
      ++rec.same_label_neighbors;
      if (rec.checked < cfg.verify_cap) {
        ++rec.checked;
        jobs.push_back({i, n.index});
      }
    }
  }
  std::vector<char> verified(jobs.size(), 0);
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto r = verify_pair(train.id(jobs[j].source),
                               train.id(jobs[j].target), features, cfg.ransac);
    verified[j] = r.verified ? 1 : 0;
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (verified[j]) ++report.records[jobs[j].source].verified;
  }
  for (auto& rec : report.records) rec.kept = rec.verified > cfg.t_frequency;
  return report;
}

std::pair<DescriptorMatrix, LabelTable> apply_cleaning(
    const CleaningReport& report, const DescriptorMatrix& train,
    const LabelTable& labels) {
  std::unordered_set<std::string> kept;
  for (const auto& r : report.records) {
    if (r.kept) kept.insert(r.id);
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < train.rows(); ++i) {
    if (kept.count(train.id(i))) rows.push_back(i);
  }
  LabelTable filtered;
  for (const auto& [id, label] : labels.entries()) {
    if (kept.count(id)) filtered.add(id, label);
  }
  return {train.select(rows), std::move(filtered)};
}

}  // namespace lmk
