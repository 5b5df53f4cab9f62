#include "lmk/recognition.h"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "lmk/knn.h"
#include "lmk/util.h"

namespace lmk {

void RecognitionConfig::validate() const {
  if (knn < 1) {
    throw Error(ErrorCode::kInvalidConfig, "recognition: knn must be >= 1");
  }
  if (!(t > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "recognition: t must be > 0");
  }
  if (use_spatial) ransac.validate();
}

namespace {

struct LabelLess {
  bool operator()(const std::string& a, const std::string& b) const {
    return label_less(a, b);
  }
};

}  // namespace

Prediction score_neighborhood(const std::string& query_id,
                              const std::vector<VoteNeighbor>& neighbors,
                              const RecognitionConfig& cfg) {
  struct Accumulator {
    double similarity = 0.0;
    double spatial = 0.0;
    std::size_t max_inliers = 0;
  };
  std::map<std::string, Accumulator, LabelLess> per_label;
  for (const auto& n : neighbors) {
    auto& acc = per_label[n.label];
    const double spatial =
        std::min(cfg.t, static_cast<double>(n.inliers)) / cfg.t;
    if (cfg.binding == SpatialBinding::kInsideSum) {
      acc.similarity += (1.0 - n.distance) + (cfg.use_spatial ? spatial : 0.0);
    } else {
      acc.similarity += 1.0 - n.distance;
      acc.max_inliers = std::max(acc.max_inliers, n.inliers);
    }
  }
  Prediction p;
  p.query_id = query_id;
  bool first = true;
  for (auto& [label, acc] : per_label) {
    double score = acc.similarity;
    if (cfg.binding == SpatialBinding::kOutsideSum && cfg.use_spatial) {
      score += std::min(cfg.t, static_cast<double>(acc.max_inliers)) / cfg.t;
    }
    p.label_scores.emplace_back(label, score);
    // Labels arrive in ascending order, so '>' keeps the smallest on ties.
    if (first || score > p.confidence) {
      p.label = label;
      p.confidence = score;
      first = false;
    }
  }
  return p;
}

Prediction soft_vote(std::span<const float> query, const std::string& query_id,
                     const DescriptorMatrix& train, const LabelTable& labels,
                     const InlierFn& inliers, const RecognitionConfig& cfg) {
  cfg.validate();
  if (train.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "soft_vote: empty train set for query " + query_id);
  }
  if (query.size() != train.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "soft_vote: query " + query_id + " has wrong dimension");
  }
  const auto nn = knn_search_row(query, query_id, train, cfg.knn, false);
  std::vector<VoteNeighbor> neighborhood;
  neighborhood.reserve(nn.neighbors.size());
  for (const auto& n : nn.neighbors) {
    VoteNeighbor v;
    v.id = n.id;
    v.label = labels.at(n.id);
    v.distance = n.distance;
    if (cfg.use_spatial) v.inliers = inliers(query_id, n.id);
    neighborhood.push_back(std::move(v));
  }
  return score_neighborhood(query_id, neighborhood, cfg);
}

InlierFn feature_inliers(const LocalFeatureSet& features,
                         const RansacConfig& cfg) {
  // R(x_i, q) uses the query's features as match source.
  return [&features, cfg](const std::string& q, const std::string& x) {
    return pairwise_inliers(q, x, features, cfg);
  };
}

Prediction soft_vote(std::span<const float> query, const std::string& query_id,
                     const DescriptorMatrix& train, const LabelTable& labels,
                     const LocalFeatureSet& features,
                     const RecognitionConfig& cfg) {
  return soft_vote(query, query_id, train, labels,
                   feature_inliers(features, cfg.ransac), cfg);
}

std::vector<Prediction> recognize_batch(const DescriptorMatrix& queries,
                                        const DescriptorMatrix& train,
                                        const LabelTable& labels,
                                        const InlierFn& inliers,
                                        const RecognitionConfig& cfg) {
  cfg.validate();
  if (queries.dim() != train.dim()) {
    throw Error(ErrorCode::kDimMismatch, "recognize: query/train dim mismatch");
  }
  std::vector<Prediction> out(queries.rows());
  parallel_for(queries.rows(), resolve_threads(cfg.threads),
               [&](std::size_t q) {
                 out[q] = soft_vote(queries.row(q), queries.id(q), train,
                                    labels, inliers, cfg);
               });
  return out;
}

std::vector<Prediction> recognize_batch(const DescriptorMatrix& queries,
                                        const DescriptorMatrix& train,
                                        const LabelTable& labels,
                                        const LocalFeatureSet& features,
                                        const RecognitionConfig& cfg) {
  return recognize_batch(queries, train, labels,
                         feature_inliers(features, cfg.ransac), cfg);
}

std::vector<Prediction> suppress_distractors(std::vector<Prediction> preds,
                                             const DistractorConfig& cfg) {
  if (cfg.frequency_threshold < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "distractor frequency threshold must be >= 1");
  }
  std::unordered_map<std::string, std::size_t> frequency;
  for (const auto& p : preds) ++frequency[p.label];
  for (auto& p : preds) {
    const std::size_t f = frequency[p.label];
    if (f > cfg.frequency_threshold) {
      if (!p.original_confidence) p.original_confidence = p.confidence;
      p.confidence = -static_cast<double>(f);
    }
  }
  return preds;
}

}  // namespace lmk
