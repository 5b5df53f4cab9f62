#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "lmk/dataset.h"

namespace lmk {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Correspondence {
  std::size_t source_index = 0;  // keypoint index in the source image
  std::size_t target_index = 0;  // keypoint index in the target image
  Point2 source;
  Point2 target;
  double descriptor_distance = 0.0;
};

using CorrespondenceSet = std::vector<Correspondence>;

// target = A * source + t
struct AffineTransform {
  double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;
  double tx = 0.0, ty = 0.0;

  Point2 apply(Point2 p) const {
    return {a11 * p.x + a12 * p.y + tx, a21 * p.x + a22 * p.y + ty};
  }
  double determinant() const { return a11 * a22 - a12 * a21; }
};

inline constexpr double kMinDeterminant = 1e-9;
inline constexpr double kMinTriangleArea = 1e-6;

struct RansacConfig {
  int iterations = 1000;
  double reprojection_tolerance = 3.0;  // px
  // A pair counts as verified when inlier_count >= inlier_threshold.
  int inlier_threshold = 30;
  double match_distance_max = 0.8;
  bool mutual_check = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct VerificationResult {
  std::size_t inlier_count = 0;  // R(., .)
  std::optional<AffineTransform> transform;
  bool verified = false;
  // Inlier count of the best minimal-sample hypothesis before refitting.
  std::size_t raw_best_count = 0;
  // Indices into the correspondence set, ascending.
  std::vector<std::size_t> inliers;
};

// Nearest target descriptor for every source descriptor (L2), filtered by
// cfg.match_distance_max and, when enabled, mutual nearest-neighbor agreement.
// Ties go to the lower keypoint index.
CorrespondenceSet match_features(const ImageFeatures& src,
                                 const ImageFeatures& dst,
                                 const RansacConfig& cfg);

// Exact affine map through three correspondences; nullopt when the source
// triangle has area below kMinTriangleArea or |det A| <= kMinDeterminant.
std::optional<AffineTransform> estimate_affine(
    const std::array<Correspondence, 3>& sample);

// Least-squares affine fit over all given correspondences; nullopt for a
// rank-deficient system.
std::optional<AffineTransform> fit_affine_least_squares(
    const CorrespondenceSet& c, const std::vector<std::size_t>& subset);

double reprojection_error(const AffineTransform& t, const Correspondence& c);

// RANSAC over random 3-subsets with cfg.seed, best model by inlier count then
// lower summed inlier error, refit on inliers. Fewer than 3 correspondences
// give an unverified result with zero inliers.
VerificationResult ransac_verify(const CorrespondenceSet& c,
                                 const RansacConfig& cfg);

// Seed for one directional pair, independent of scheduling order.
std::uint64_t pair_seed(std::uint64_t base_seed, std::string_view source_id,
                        std::string_view target_id);

// R(a, b): a is the match source. Uses pair_seed(cfg.seed, a, b).
VerificationResult verify_pair(std::string_view a, std::string_view b,
                               const LocalFeatureSet& features,
                               const RansacConfig& cfg);
std::size_t pairwise_inliers(std::string_view a, std::string_view b,
                             const LocalFeatureSet& features,
                             const RansacConfig& cfg);

}  // namespace lmk
