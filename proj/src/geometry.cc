#include "lmk/geometry.h"

#include <cmath>
#include <limits>
#include <random>

#include "lmk/knn.h"
#include "lmk/util.h"

namespace lmk {

void RansacConfig::validate() const {
  if (iterations < 1) {
    throw Error(ErrorCode::kInvalidConfig, "ransac: iterations must be >= 1");
  }
  if (!(reprojection_tolerance > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "ransac: tolerance must be > 0");
  }
  if (inlier_threshold < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "ransac: inlier threshold must be >= 1");
  }
  if (!(match_distance_max >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "ransac: match distance max must be >= 0");
  }
}

CorrespondenceSet match_features(const ImageFeatures& src,
                                 const ImageFeatures& dst,
                                 const RansacConfig& cfg) {
  CorrespondenceSet out;
  if (src.size() == 0 || dst.size() == 0) return out;
  if (src.d_local != dst.d_local) {
    throw Error(ErrorCode::kDimMismatch,
                "match_features: d_local differs between " + src.id + " and " +
                    dst.id);
  }
  const std::size_t m = src.size();
  const std::size_t n = dst.size();
  std::vector<double> dist(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dist[i * n + j] = squared_distance(src.descriptor(i), dst.descriptor(j));
    }
  }
  // Strict '<' keeps the lowest index on ties.
  std::vector<std::size_t> best_for_dst(n, 0);
  if (cfg.mutual_check) {
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < m; ++i) {
        if (dist[i * n + j] < dist[best * n + j]) best = i;
      }
      best_for_dst[j] = best;
    }
  }
  const double max_sq = cfg.match_distance_max * cfg.match_distance_max;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (dist[i * n + j] < dist[i * n + best]) best = j;
    }
    const double d2 = dist[i * n + best];
    if (d2 > max_sq) continue;
    if (cfg.mutual_check && best_for_dst[best] != i) continue;
    const auto& s = src.keypoints[i];
    const auto& t = dst.keypoints[best];
    out.push_back({i, best, {s.x, s.y}, {t.x, t.y}, std::sqrt(d2)});
  }
  return out;
}

std::optional<AffineTransform> estimate_affine(
    const std::array<Correspondence, 3>& sample) {
  const Point2 p0 = sample[0].source;
  const Point2 p1 = sample[1].source;
  const Point2 p2 = sample[2].source;
  // Work relative to p0 so the solve is well conditioned for large coords.
  const double ux = p1.x - p0.x, uy = p1.y - p0.y;
  const double vx = p2.x - p0.x, vy = p2.y - p0.y;
  const double cross = ux * vy - uy * vx;
  if (std::abs(cross) / 2.0 < kMinTriangleArea) return std::nullopt;

  const Point2 q0 = sample[0].target;
  const double dux = sample[1].target.x - q0.x, duy = sample[1].target.y - q0.y;
  const double dvx = sample[2].target.x - q0.x, dvy = sample[2].target.y - q0.y;
  // Solve [a11 a12] * [u v] = [du dv] per output row.
  AffineTransform t;
  t.a11 = (dux * vy - dvx * uy) / cross;
  t.a12 = (dvx * ux - dux * vx) / cross;
  t.a21 = (duy * vy - dvy * uy) / cross;
  t.a22 = (dvy * ux - duy * vx) / cross;
  t.tx = q0.x - (t.a11 * p0.x + t.a12 * p0.y);
  t.ty = q0.y - (t.a21 * p0.x + t.a22 * p0.y);
  if (std::abs(t.determinant()) <= kMinDeterminant) return std::nullopt;
  return t;
}

std::optional<AffineTransform> fit_affine_least_squares(
    const CorrespondenceSet& c, const std::vector<std::size_t>& subset) {
  if (subset.size() < 3) return std::nullopt;
  double msx = 0, msy = 0, mtx = 0, mty = 0;
  for (std::size_t i : subset) {
    msx += c[i].source.x;
    msy += c[i].source.y;
    mtx += c[i].target.x;
    mty += c[i].target.y;
  }
  const double count = static_cast<double>(subset.size());
  msx /= count;
  msy /= count;
  mtx /= count;
  mty /= count;
  double sxx = 0, sxy = 0, syy = 0;
  double txx = 0, txy = 0, tyx = 0, tyy = 0;
  for (std::size_t i : subset) {
    const double x = c[i].source.x - msx, y = c[i].source.y - msy;
    const double u = c[i].target.x - mtx, v = c[i].target.y - mty;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    txx += u * x;
    txy += u * y;
    tyx += v * x;
    tyy += v * y;
  }
  const double det = sxx * syy - sxy * sxy;
  if (!(std::abs(det) > 1e-12 * std::max(1.0, sxx * syy))) return std::nullopt;
  AffineTransform t;
  t.a11 = (txx * syy - txy * sxy) / det;
  t.a12 = (txy * sxx - txx * sxy) / det;
  t.a21 = (tyx * syy - tyy * sxy) / det;
  t.a22 = (tyy * sxx - tyx * sxy) / det;
  t.tx = mtx - (t.a11 * msx + t.a12 * msy);
  t.ty = mty - (t.a21 * msx + t.a22 * msy);
  return t;
}

double reprojection_error(const AffineTransform& t, const Correspondence& c) {
  const Point2 p = t.apply(c.source);
  return std::hypot(p.x - c.target.x, p.y - c.target.y);
}

namespace {

struct Score {
  std::size_t count = 0;
  double error_sum = 0.0;
};

Score score_model(const AffineTransform& t, const CorrespondenceSet& c,
                  double tolerance, std::vector<std::size_t>* inliers) {
  Score s;
  if (inliers) inliers->clear();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double e = reprojection_error(t, c[i]);
    if (e <= tolerance) {
      ++s.count;
      s.error_sum += e;
      if (inliers) inliers->push_back(i);
    }
  }
  return s;
}

}  // namespace

VerificationResult ransac_verify(const CorrespondenceSet& c,
                                 const RansacConfig& cfg) {
  cfg.validate();
  VerificationResult result;
  if (c.size() < 3) return result;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
  std::optional<AffineTransform> best;
  Score best_score;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::size_t i0 = pick(rng), i1 = pick(rng), i2 = pick(rng);
    while (i1 == i0) i1 = pick(rng);
    while (i2 == i0 || i2 == i1) i2 = pick(rng);
    const auto model = estimate_affine({c[i0], c[i1], c[i2]});
    if (!model) continue;
    const Score s = score_model(*model, c, cfg.reprojection_tolerance, nullptr);
    if (!best || s.count > best_score.count ||
        (s.count == best_score.count && s.error_sum < best_score.error_sum)) {
      best = model;
      best_score = s;
    }
  }
  if (!best) return result;

  result.raw_best_count = best_score.count;
  std::vector<std::size_t> inliers;
  score_model(*best, c, cfg.reprojection_tolerance, &inliers);
  AffineTransform chosen = *best;
  if (const auto refit = fit_affine_least_squares(c, inliers);
      refit && std::abs(refit->determinant()) > kMinDeterminant) {
    std::vector<std::size_t> refit_inliers;
    const Score s =
        score_model(*refit, c, cfg.reprojection_tolerance, &refit_inliers);
    // A refit that loses support is discarded in favour of the sample model.
    if (s.count >= inliers.size()) {
      chosen = *refit;
      inliers = std::move(refit_inliers);
    }
  }
  result.transform = chosen;
  result.inlier_count = inliers.size();
  result.inliers = std::move(inliers);
  result.verified =
      result.inlier_count >= static_cast<std::size_t>(cfg.inlier_threshold);
  return result;
}

std::uint64_t pair_seed(std::uint64_t base_seed, std::string_view source_id,
                        std::string_view target_id) {
  std::uint64_t h = fnv1a64(source_id, splitmix64(base_seed));
  h = fnv1a64(std::string_view("\x1f", 1), h);
  h = fnv1a64(target_id, h);
  return splitmix64(h);
}

VerificationResult verify_pair(std::string_view a, std::string_view b,
                               const LocalFeatureSet& features,
                               const RansacConfig& cfg) {
  const ImageFeatures& src = features.at(a);
  const ImageFeatures& dst = features.at(b);
  RansacConfig pair_cfg = cfg;
  pair_cfg.seed = pair_seed(cfg.seed, a, b);
  return ransac_verify(match_features(src, dst, pair_cfg), pair_cfg);
}

std::size_t pairwise_inliers(std::string_view a, std::string_view b,
                             const LocalFeatureSet& features,
                             const RansacConfig& cfg) {
  return verify_pair(a, b, features, cfg).inlier_count;
}

}  // namespace lmk
