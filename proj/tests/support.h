#pragma once
// Fixtures and independent reference implementations shared by the tests.
// Oracles here are written from the definitions, never by calling the code
// under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "lmk/dataset.h"
#include "lmk/geometry.h"

namespace lmk_test {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lmk_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::string> make_ids(const std::string& prefix, std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

// Rows drawn from N(0,1) and scaled to unit length in double.
inline lmk::DescriptorMatrix random_unit_matrix(std::mt19937_64& rng, std::size_t rows,
                                                std::size_t dim, const std::string& prefix) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<float> data(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> v(dim);
    double n2 = 0.0;
    for (auto& x : v) {
      x = g(rng);
      n2 += x * x;
    }
    const double n = std::sqrt(n2);
    for (std::size_t d = 0; d < dim; ++d) data[r * dim + d] = static_cast<float>(v[d] / n);
  }
  lmk::DescriptorMatrix m(make_ids(prefix, rows), dim, std::move(data));
  m.mark_normalized();
  return m;
}

inline lmk::DescriptorMatrix matrix(std::vector<std::string> ids,
                                    std::vector<std::vector<float>> rows) {
  const std::size_t dim = rows.empty() ? 1 : rows.front().size();
  std::vector<float> data;
  for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
  return lmk::DescriptorMatrix(std::move(ids), dim, std::move(data));
}

// ---- oracles ---------------------------------------------------------------

struct OracleNeighbor {
  std::string id;
  double distance;
};

inline double oracle_sq_dist(const lmk::DescriptorMatrix& a, std::size_t i,
                             const lmk::DescriptorMatrix& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.dim(); ++d) {
    const double diff = double(a.data()[i * a.dim() + d]) - double(b.data()[j * b.dim() + d]);
    s += diff * diff;
  }
  return s;
}

// Full sort of every database row by (distance, id).
inline std::vector<OracleNeighbor> oracle_knn(const lmk::DescriptorMatrix& q, std::size_t qi,
                                              const lmk::DescriptorMatrix& db, std::size_t k,
                                              bool exclude_self) {
  std::vector<OracleNeighbor> all;
  for (std::size_t j = 0; j < db.rows(); ++j) {
    if (exclude_self && db.ids()[j] == q.ids()[qi]) continue;
    all.push_back({db.ids()[j], oracle_sq_dist(q, qi, db, j)});
  }
  std::sort(all.begin(), all.end(), [](const OracleNeighbor& a, const OracleNeighbor& b) {
    return std::tie(a.distance, a.id) < std::tie(b.distance, b.id);
  });
  if (all.size() > k) all.resize(k);
  return all;
}

inline std::vector<double> oracle_normalize(std::vector<double> v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (n2 > 0.0) {
    const double n = std::sqrt(n2);
    for (auto& x : v) x /= n;
  }
  return v;
}

// Affine map with the given scale, rotation (radians), and translation.
inline lmk::AffineTransform similarity(double scale, double angle, double tx, double ty) {
  lmk::AffineTransform t;
  t.a11 = scale * std::cos(angle);
  t.a12 = -scale * std::sin(angle);
  t.a21 = scale * std::sin(angle);
  t.a22 = scale * std::cos(angle);
  t.tx = tx;
  t.ty = ty;
  return t;
}

// 80 planted inliers under `truth` with gaussian pixel noise, then uniform
// outliers, shuffled.
inline lmk::CorrespondenceSet planted_correspondences(std::mt19937_64& rng,
                                                      const lmk::AffineTransform& truth,
                                                      std::size_t inliers, std::size_t outliers,
                                                      double noise_px,
                                                      std::vector<bool>* is_inlier = nullptr) {
  std::uniform_real_distribution<double> pos(0.0, 640.0);
  std::normal_distribution<double> noise(0.0, noise_px);
  lmk::CorrespondenceSet c;
  std::vector<bool> flags;
  for (std::size_t i = 0; i < inliers + outliers; ++i) {
    lmk::Correspondence x;
    x.source = {pos(rng), pos(rng)};
    if (i < inliers) {
      const auto p = truth.apply(x.source);
      x.target = {p.x + noise(rng), p.y + noise(rng)};
    } else {
      x.target = {pos(rng), pos(rng)};
    }
    c.push_back(x);
    flags.push_back(i < inliers);
  }
  std::vector<std::size_t> order(c.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  lmk::CorrespondenceSet shuffled;
  std::vector<bool> shuffled_flags;
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.push_back(c[order[i]]);
    shuffled.back().source_index = i;
    shuffled.back().target_index = i;
    shuffled_flags.push_back(flags[order[i]]);
  }
  if (is_inlier) *is_inlier = shuffled_flags;
  return shuffled;
}

// Image whose keypoints are `points` with descriptors equal to the unit
// basis-like codes in `codes` (row-major, d_local wide).
inline lmk::ImageFeatures make_image(const std::string& id,
                                     const std::vector<lmk::Point2>& points,
                                     const std::vector<float>& codes, std::size_t d_local) {
  lmk::ImageFeatures img;
  img.id = id;
  img.d_local = d_local;
  for (const auto& p : points) {
    lmk::Keypoint k;
    k.x = static_cast<float>(p.x);
    k.y = static_cast<float>(p.y);
    img.keypoints.push_back(k);
  }
  img.descriptors = codes;
  return img;
}

}  // namespace lmk_test
