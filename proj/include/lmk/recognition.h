#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lmk/dataset.h"
#include "lmk/geometry.h"

namespace lmk {

// How the saturated inlier term binds in the voting score.
enum class SpatialBinding {
  // s_l = sum_i [(1 - d_i^2) + min(t, R_i) / t]
  kInsideSum,
  // s_l = sum_i (1 - d_i^2) + min(t, max_i R_i) / t
  kOutsideSum,
};

struct RecognitionConfig {
  std::size_t knn = 3;
  double t = 70.0;
  bool use_spatial = true;
  SpatialBinding binding = SpatialBinding::kInsideSum;
  RansacConfig ransac;
  int threads = 1;

  void validate() const;
};

// One retrieved train image inside N_l(q).
struct VoteNeighbor {
  std::string id;
  std::string label;
  double distance = 0.0;    // ||x_i - q||^2
  std::size_t inliers = 0;  // R(x_i, q); 0 when spatial scoring is off
};

// R(query, train) provider; the query is the match source.
using InlierFn =
    std::function<std::size_t(const std::string& query_id,
                              const std::string& train_id)>;

// Scores labels from an already-assembled neighborhood. Ties in s_l go to
// the smaller label token.
Prediction score_neighborhood(const std::string& query_id,
                              const std::vector<VoteNeighbor>& neighbors,
                              const RecognitionConfig& cfg);

// Retrieves cfg.knn train neighbors of the query and soft-votes.
Prediction soft_vote(std::span<const float> query, const std::string& query_id,
                     const DescriptorMatrix& train, const LabelTable& labels,
                     const InlierFn& inliers, const RecognitionConfig& cfg);

Prediction soft_vote(std::span<const float> query, const std::string& query_id,
                     const DescriptorMatrix& train, const LabelTable& labels,
                     const LocalFeatureSet& features,
                     const RecognitionConfig& cfg);

// Inlier provider backed by local features and pair-derived RANSAC seeds.
InlierFn feature_inliers(const LocalFeatureSet& features,
                         const RansacConfig& cfg);

std::vector<Prediction> recognize_batch(const DescriptorMatrix& queries,
                                        const DescriptorMatrix& train,
                                        const LabelTable& labels,
                                        const InlierFn& inliers,
                                        const RecognitionConfig& cfg);

std::vector<Prediction> recognize_batch(const DescriptorMatrix& queries,
                                        const DescriptorMatrix& train,
                                        const LabelTable& labels,
                                        const LocalFeatureSet& features,
                                        const RecognitionConfig& cfg);

struct DistractorConfig {
  std::size_t frequency_threshold = 30;
};

// Labels predicted more than frequency_threshold times across the batch get
// every such prediction's confidence replaced by -frequency.
std::vector<Prediction> suppress_distractors(std::vector<Prediction> preds,
                                             const DistractorConfig& cfg);

}  // namespace lmk
