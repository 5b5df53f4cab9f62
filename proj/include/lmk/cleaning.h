#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lmk/dataset.h"
#include "lmk/geometry.h"

namespace lmk {

struct CleaningConfig {
  std::size_t k = 1000;          // neighbor pool per image
  std::size_t verify_cap = 100;  // same-label neighbors verified per image
  // An image is kept when its verified count is strictly greater than this.
  std::size_t t_frequency = 2;
  RansacConfig ransac;
  int threads = 1;

  void validate() const;
};

struct CleaningRecord {
  std::string id;
  std::string label;
  std::size_t same_label_neighbors = 0;  // within the k-pool
  std::size_t checked = 0;               // min(same_label_neighbors, cap)
  std::size_t verified = 0;
  bool kept = false;
};

struct CleaningReport {
  std::vector<CleaningRecord> records;  // train order
  std::size_t t_frequency = 0;

  std::vector<std::string> kept_ids() const;
  // Kept set that the same verification counts give at another threshold.
  std::vector<std::string> kept_ids_at(std::size_t t_frequency) const;
};

// kNN filtering, same-label spatial verification, frequency thresholding.
// Each train image is the match source against its same-label neighbors.
CleaningReport clean_train_set(const DescriptorMatrix& train,
                               const LabelTable& labels,
                               const LocalFeatureSet& features,
                               const CleaningConfig& cfg);

// Train descriptors and labels restricted to the report's kept ids.
std::pair<DescriptorMatrix, LabelTable> apply_cleaning(
    const CleaningReport& report, const DescriptorMatrix& train,
    const LabelTable& labels);

}  // namespace lmk
