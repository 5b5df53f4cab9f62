#include <numbers>

#include "doctest.h"
#include "lmk/geometry.h"
#include "lmk/synthetic.h"
#include "lmk/util.h"
#include "support.h"

using namespace lmk;

namespace {

// Descriptor i is the i-th standard basis vector, so matches are unambiguous.
std::vector<float> basis_codes(std::size_t n, std::size_t d_local, std::size_t offset = 0) {
  std::vector<float> codes(n * d_local, 0.f);
  for (std::size_t i = 0; i < n; ++i) codes[i * d_local + (i + offset) % d_local] = 1.f;
  return codes;
}

std::vector<Point2> random_points(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 640.0);
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
  return pts;
}

Correspondence corr(Point2 s, Point2 t) {
  Correspondence c;
  c.source = s;
  c.target = t;
  return c;
}

}  // namespace

TEST_CASE("match_features: identical sets give M perfect matches") {
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 12);
  const auto a = lmk_test::make_image("a", pts, basis_codes(12, 16), 16);
  RansacConfig cfg;
  const auto m = match_features(a, a, cfg);
  REQUIRE(m.size() == 12);
  for (const auto& c : m) {
    CHECK(c.source_index == c.target_index);
    CHECK(c.descriptor_distance == 0.0);
  }
}

TEST_CASE("match_features: far descriptors and empty sets give no matches") {
  std::mt19937_64 rng(2);
  const auto pts = random_points(rng, 4);
  // Orthogonal unit codes sit at distance sqrt(2) > 0.8.
  const auto a = lmk_test::make_image("a", pts, basis_codes(4, 8, 0), 8);
  const auto b = lmk_test::make_image("b", pts, basis_codes(4, 8, 4), 8);
  RansacConfig cfg;
  CHECK(match_features(a, b, cfg).empty());
  const auto empty = lmk_test::make_image("e", {}, {}, 8);
  CHECK(match_features(a, empty, cfg).empty());
  CHECK(match_features(empty, a, cfg).empty());
}

TEST_CASE("match_features: planted matches among distractors equal the oracle") {
  std::mt19937_64 rng(3);
  const std::size_t d_local = 64;
  std::normal_distribution<float> g(0.f, 1.f);
  auto unit = [&] {
    std::vector<float> v(d_local);
    double n = 0.0;
    for (auto& x : v) {
      x = g(rng);
      n += double(x) * x;
    }
    for (auto& x : v) x = float(x / std::sqrt(n));
    return v;
  };
  std::vector<float> src_codes, dst_codes;
  std::vector<std::pair<std::size_t, std::size_t>> planted;
  // 30 shared codes (dst gets small noise) + 10 private distractors on each side.
  std::vector<std::vector<float>> shared;
  for (int i = 0; i < 30; ++i) shared.push_back(unit());
  for (int i = 0; i < 30; ++i) src_codes.insert(src_codes.end(), shared[i].begin(), shared[i].end());
  for (int i = 0; i < 10; ++i) {
    const auto v = unit();
    src_codes.insert(src_codes.end(), v.begin(), v.end());
  }
  for (int i = 0; i < 10; ++i) {
    const auto v = unit();
    dst_codes.insert(dst_codes.end(), v.begin(), v.end());
  }
  for (int i = 0; i < 30; ++i) {
    auto v = shared[29 - i];
    for (auto& x : v) x += 0.01f * g(rng);
    dst_codes.insert(dst_codes.end(), v.begin(), v.end());
    planted.push_back({std::size_t(29 - i), std::size_t(10 + i)});
  }
  const auto src = lmk_test::make_image("s", random_points(rng, 40), src_codes, d_local);
  const auto dst = lmk_test::make_image("t", random_points(rng, 40), dst_codes, d_local);

  // Exhaustive mutual nearest neighbours under the distance cap.
  auto dist = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t d = 0; d < d_local; ++d) {
      const double diff = double(src_codes[i * d_local + d]) - dst_codes[j * d_local + d];
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  std::vector<std::pair<std::size_t, std::size_t>> oracle;
  for (std::size_t i = 0; i < 40; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < 40; ++j) if (dist(i, j) < dist(i, best)) best = j;
    std::size_t back = 0;
    for (std::size_t i2 = 1; i2 < 40; ++i2) if (dist(i2, best) < dist(back, best)) back = i2;
    if (back == i && dist(i, best) <= 0.8) oracle.push_back({i, best});
  }
  std::sort(planted.begin(), planted.end());
  CHECK(oracle == planted);

  RansacConfig cfg;
  std::vector<std::pair<std::size_t, std::size_t>> got;
  for (const auto& c : match_features(src, dst, cfg)) got.push_back({c.source_index, c.target_index});
  std::sort(got.begin(), got.end());
  CHECK(got == oracle);
}

TEST_CASE("estimate_affine: identity, collinear, and a known similarity") {
  const std::array<Correspondence, 3> id = {corr({0, 0}, {0, 0}), corr({1, 0}, {1, 0}),
                                            corr({0, 1}, {0, 1})};
  const auto t = estimate_affine(id);
  REQUIRE(t.has_value());
  CHECK(t->a11 == doctest::Approx(1.0));
  CHECK(t->a12 == doctest::Approx(0.0));
  CHECK(t->tx == doctest::Approx(0.0));

  const std::array<Correspondence, 3> line = {corr({0, 0}, {0, 0}), corr({1, 1}, {1, 1}),
                                              corr({2, 2}, {2, 2})};
  CHECK_FALSE(estimate_affine(line).has_value());

  const auto truth = lmk_test::similarity(2.0, std::numbers::pi / 6.0, 5.0, -3.0);
  std::array<Correspondence, 3> s;
  const Point2 src[3] = {{10, 20}, {200, 40}, {60, 300}};
  for (int i = 0; i < 3; ++i) s[i] = corr(src[i], truth.apply(src[i]));
  const auto r = estimate_affine(s);
  REQUIRE(r.has_value());
  CHECK(std::abs(r->a11 - truth.a11) < 1e-9);
  CHECK(std::abs(r->a12 - truth.a12) < 1e-9);
  CHECK(std::abs(r->a21 - truth.a21) < 1e-9);
  CHECK(std::abs(r->a22 - truth.a22) < 1e-9);
  CHECK(std::abs(r->tx - truth.tx) < 1e-9);
  CHECK(std::abs(r->ty - truth.ty) < 1e-9);
}

TEST_CASE("estimate_affine: a map that collapses the plane is rejected") {
  // Targets all on one line: determinant of the fitted map is 0.
  const std::array<Correspondence, 3> s = {corr({0, 0}, {0, 0}), corr({10, 0}, {10, 0}),
                                           corr({0, 10}, {20, 0})};
  CHECK_FALSE(estimate_affine(s).has_value());
}

TEST_CASE("ransac_verify: exact correspondences and tiny inputs") {
  std::mt19937_64 rng(4);
  const auto truth = lmk_test::similarity(1.1, 0.2, 30.0, -12.0);
  const auto c = lmk_test::planted_correspondences(rng, truth, 40, 0, 0.0);
  RansacConfig cfg;
  const auto r = ransac_verify(c, cfg);
  CHECK(r.inlier_count == 40);
  CHECK(r.verified);

  const CorrespondenceSet two(c.begin(), c.begin() + 2);
  const auto small = ransac_verify(two, cfg);
  CHECK(small.inlier_count == 0);
  CHECK_FALSE(small.verified);
  CHECK(ransac_verify({}, cfg).inlier_count == 0);
}

TEST_CASE("ransac_verify: inlier threshold is inclusive") {
  std::mt19937_64 rng(5);
  const auto c = lmk_test::planted_correspondences(rng, lmk_test::similarity(1, 0, 0, 0), 30, 0, 0.0);
  RansacConfig cfg;
  CHECK(ransac_verify(c, cfg).verified);
  cfg.inlier_threshold = 31;
  CHECK_FALSE(ransac_verify(c, cfg).verified);
}

TEST_CASE("ransac_verify: invariants on planted data") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const auto truth = lmk_test::similarity(0.9, -0.3, 15.0, 8.0);
    const auto c = lmk_test::planted_correspondences(rng, truth, 80, 20, 0.5);
    RansacConfig cfg;
    cfg.seed = seed;
    const auto r = ransac_verify(c, cfg);
    CHECK(r.inlier_count <= c.size());
    CHECK(r.inliers.size() == r.inlier_count);
    REQUIRE(r.transform.has_value());
    for (auto i : r.inliers) CHECK(reprojection_error(*r.transform, c[i]) <= cfg.reprojection_tolerance);

    // Same seed, same result.
    const auto again = ransac_verify(c, cfg);
    CHECK(again.inlier_count == r.inlier_count);
    CHECK(again.inliers == r.inliers);

    // Translating every target keeps the count.
    auto shifted = c;
    for (auto& x : shifted) {
      x.target.x += 123.0;
      x.target.y -= 45.0;
    }
    CHECK(ransac_verify(shifted, cfg).inlier_count == r.inlier_count);
  }
}

TEST_CASE("ransac config validation") {
  RansacConfig cfg;
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = RansacConfig{};
  cfg.reprojection_tolerance = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("pair seeds are directional and stable") {
  CHECK(pair_seed(0, "a", "b") == pair_seed(0, "a", "b"));
  CHECK(pair_seed(0, "a", "b") != pair_seed(0, "b", "a"));
  CHECK(pair_seed(0, "a", "b") != pair_seed(1, "a", "b"));
  // The separator keeps ("ab","c") and ("a","bc") apart.
  CHECK(pair_seed(0, "ab", "c") != pair_seed(0, "a", "bc"));
}

TEST_CASE("pairwise_inliers") {
  std::mt19937_64 rng(6);
  LocalFeatureSet set;
  const auto pts = random_points(rng, 35);
  set.add(lmk_test::make_image("a", pts, basis_codes(35, 128), 128));
  set.add(lmk_test::make_image("far", random_points(rng, 35), basis_codes(35, 128, 35), 128));
  RansacConfig cfg;
  CHECK(pairwise_inliers("a", "a", set, cfg) == 35);
  CHECK(pairwise_inliers("a", "far", set, cfg) == 0);
  CHECK_THROWS_AS(pairwise_inliers("a", "nobody", set, cfg), Error);
}

TEST_CASE("pairwise_inliers: planted same-landmark synthetic pair") {
  SyntheticConfig cfg;
  cfg.keypoints_per_image = 40;
  const auto d = generate_synthetic(cfg);
  RansacConfig rc;
  for (std::size_t l = 0; l < cfg.num_labels; ++l) {
    const std::string a = "train_" + std::to_string(l) + "_0";
    const std::string b = "train_" + std::to_string(l) + "_1";
    CHECK(pairwise_inliers(a, b, d.features, rc) >= 0.8 * cfg.keypoints_per_image);
  }
}
