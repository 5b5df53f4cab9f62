#include "lmk/mathcheck.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "lmk/metric_math.h"

namespace lmk {
namespace {

constexpr double kStep = 1e-5;
constexpr double kGradTolerance = 1e-5;
// Components smaller than this are compared in absolute terms.
constexpr double kMagnitudeFloor = 1e-3;

double relative_error(double analytic, double numeric) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), kMagnitudeFloor});
  return std::abs(analytic - numeric) / scale;
}

FeatureMap random_map(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_int_distribution<std::size_t> size(1, 4);
  std::uniform_real_distribution<double> value(lo, hi);
  FeatureMap m(size(rng), size(rng), size(rng));
  for (double& v : m.values) v = value(rng);
  return m;
}

std::vector<double> random_cosines(std::mt19937_64& rng, std::size_t classes) {
  // Stays clear of |c| = 1, where the angular margin derivative diverges, and
  // of the arc fallback boundary at c = -cos(m).
  std::uniform_real_distribution<double> value(-0.9, 0.95);
  std::vector<double> c(classes);
  for (double& v : c) v = value(rng);
  return c;
}

}  // namespace

std::vector<MathCheck> run_math_checks(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  std::vector<MathCheck> checks;

  {
    MathCheck c{"gem p=1 equals arithmetic mean", true, 0.0, 0.0};
    for (int n = 0; n < instances; ++n) {
      const FeatureMap m = random_map(rng, 0.0, 5.0);
      const auto pooled = gem_pool(m, GemConfig{1.0});
      for (std::size_t ch = 0; ch < m.channels; ++ch) {
        double sum = 0.0;
        for (std::size_t pos = 0; pos < m.positions(); ++pos) {
          sum += m.values[pos * m.channels + ch];
        }
        const double err = std::abs(pooled[ch] - sum / m.positions());
        c.worst = std::max(c.worst, err);
      }
    }
    c.passed = c.worst == 0.0;
    checks.push_back(c);
  }
  {
    FeatureMap m(2, 2, 1);
    m.values = {1.0, 2.0, 3.0, 4.0};
    const double err =
        std::abs(gem_pool(m, GemConfig{3.0})[0] - std::cbrt(25.0));
    checks.push_back({"gem 2x2 [1,2,3,4] p=3 equals 25^(1/3)", err <= 1e-9, err,
                      1e-9});
  }
  {
    MathCheck c{"gem non-decreasing in p", true, 0.0, 0.0};
    for (int n = 0; n < instances; ++n) {
      const FeatureMap m = random_map(rng, 0.0, 5.0);
      auto prev = gem_pool(m, GemConfig{1.0});
      for (double p : {1.5, 2.0, 3.0, 5.0, 8.0}) {
        const auto cur = gem_pool(m, GemConfig{p});
        for (std::size_t ch = 0; ch < cur.size(); ++ch) {
          c.worst = std::max(c.worst, prev[ch] - cur[ch] - 1e-12 * prev[ch]);
        }
        prev = cur;
      }
    }
    c.passed = c.worst <= 0.0;
    c.worst = std::max(c.worst, 0.0);
    checks.push_back(c);
  }
  {
    MathCheck c{"gem gradient vs central differences", true, 0.0,
                kGradTolerance};
    for (int n = 0; n < instances; ++n) {
      FeatureMap m = random_map(rng, 0.1, 5.0);
      const GemConfig cfg{3.0};
      const FeatureMap grad = gem_grad(m, cfg);
      for (std::size_t i = 0; i < m.values.size(); ++i) {
        const std::size_t ch = i % m.channels;
        const double orig = m.values[i];
        m.values[i] = orig + kStep;
        const double up = gem_pool(m, cfg)[ch];
        m.values[i] = orig - kStep;
        const double down = gem_pool(m, cfg)[ch];
        m.values[i] = orig;
        const double numeric = (up - down) / (2 * kStep);
        c.worst = std::max(c.worst, relative_error(grad.values[i], numeric));
      }
    }
    c.passed = c.worst <= c.tolerance;
    checks.push_back(c);
  }
  {
    MathCheck c{"softmax-xent gradient vs central differences", true, 0.0,
                kGradTolerance};
    std::normal_distribution<double> normal(0.0, 3.0);
    for (int n = 0; n < instances; ++n) {
      std::vector<double> z(8);
      for (double& v : z) v = normal(rng);
      const std::size_t target = static_cast<std::size_t>(n) % z.size();
      const auto res = softmax_xent(z, target);
      for (std::size_t k = 0; k < z.size(); ++k) {
        const double orig = z[k];
        z[k] = orig + kStep;
        const double up = softmax_xent(z, target).loss;
        z[k] = orig - kStep;
        const double down = softmax_xent(z, target).loss;
        z[k] = orig;
        c.worst = std::max(c.worst,
                           relative_error(res.grad[k], (up - down) / (2 * kStep)));
      }
    }
    c.passed = c.worst <= c.tolerance;
    checks.push_back(c);
  }
  for (MarginVariant variant : {MarginVariant::kArc, MarginVariant::kCos}) {
    MathCheck c{std::string(variant == MarginVariant::kArc ? "arc" : "cos") +
                    " margin loss gradient vs central differences",
                true, 0.0, kGradTolerance};
    MarginLossConfig cfg;
    cfg.variant = variant;
    for (int n = 0; n < instances; ++n) {
      auto cos = random_cosines(rng, 8);
      const std::size_t target = static_cast<std::size_t>(n) % cos.size();
      const auto res = margin_loss(cos, target, cfg);
      for (std::size_t k = 0; k < cos.size(); ++k) {
        const double orig = cos[k];
        cos[k] = orig + kStep;
        const double up = margin_loss(cos, target, cfg).loss;
        cos[k] = orig - kStep;
        const double down = margin_loss(cos, target, cfg).loss;
        cos[k] = orig;
        c.worst = std::max(c.worst,
                           relative_error(res.grad[k], (up - down) / (2 * kStep)));
      }
    }
    c.passed = c.worst <= c.tolerance;
    checks.push_back(c);
  }
  {
    MathCheck c{"margin 0 reduces to scaled cosine softmax", true, 0.0, 0.0};
    for (int n = 0; n < instances; ++n) {
      const auto cos = random_cosines(rng, 8);
      const std::size_t target = static_cast<std::size_t>(n) % cos.size();
      std::vector<double> scaled(cos.size());
      for (std::size_t k = 0; k < cos.size(); ++k) scaled[k] = 30.0 * cos[k];
      const double reference = softmax_xent(scaled, target).loss;
      for (MarginVariant variant : {MarginVariant::kArc, MarginVariant::kCos}) {
        MarginLossConfig cfg{0.0, 30.0, variant};
        const auto logits = margin_logits(cos, target, cfg);
        for (std::size_t k = 0; k < cos.size(); ++k) {
          c.worst = std::max(c.worst, std::abs(logits[k] - scaled[k]));
        }
        c.worst = std::max(
            c.worst, std::abs(softmax_xent(logits, target).loss - reference));
      }
    }
    c.passed = c.worst == 0.0;
    checks.push_back(c);
  }
  return checks;
}

}  // namespace lmk
