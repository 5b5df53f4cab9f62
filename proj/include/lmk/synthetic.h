#pragma once

#include <cstddef>
#include <cstdint>

#include "lmk/dataset.h"
#include "lmk/metrics.h"

namespace lmk {

// Clustered global descriptors plus local features with planted affine
// geometry. Every field participates in the output; the result is a pure
// function of the config.
struct SyntheticConfig {
  std::size_t num_labels = 4;
  std::size_t train_per_label = 5;
  // Extra train images per label with the label's global cluster but
  // unrelated local geometry (what cleaning should reject).
  std::size_t inconsistent_per_label = 0;
  std::size_t index_per_label = 3;
  std::size_t test_per_label = 2;
  std::size_t dim = 32;
  double spread = 0.3;
  // Share of test images that depict no landmark, in [0, 1).
  double distractor_fraction = 0.0;
  // Train images of a non-landmark cluster that distractor queries fall
  // near. With 0, distractor queries point in random directions.
  std::size_t distractor_train = 0;
  // Distractor train and test images render one shared template, so they
  // verify against each other like a coherent non-landmark class.
  bool distractor_shared_geometry = false;
  std::size_t keypoints_per_image = 40;
  std::size_t outliers_per_image = 10;
  std::size_t d_local = 40;
  double keypoint_noise_px = 0.5;
  double descriptor_noise = 0.02;
  double image_size = 640.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  DescriptorMatrix train;
  DescriptorMatrix index;
  DescriptorMatrix test;
  LocalFeatureSet features;  // every train, index, and test image
  LabelTable train_labels;
  LabelTable index_labels;
  RecognitionTruth test_truth;
  RelevanceTable relevance;  // per test image: index images of its label
  std::string distractor_label;  // label of the distractor cluster, if any
};

SyntheticData generate_synthetic(const SyntheticConfig& cfg);

}  // namespace lmk
