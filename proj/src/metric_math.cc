#include "lmk/metric_math.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lmk/util.h"

namespace lmk {
namespace {

void check_map(const FeatureMap& map, const GemConfig& cfg) {
  if (map.positions() == 0 || map.channels == 0) {
    throw Error(ErrorCode::kInvalidArgument, "gem: empty feature map");
  }
  if (map.values.size() != map.positions() * map.channels) {
    throw Error(ErrorCode::kCountMismatch, "gem: value count mismatch");
  }
  if (!(cfg.p >= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "gem: p must be >= 1");
  }
}

}  // namespace

std::vector<double> gem_pool(const FeatureMap& map, const GemConfig& cfg) {
  check_map(map, cfg);
  const double hw = static_cast<double>(map.positions());
  std::vector<double> out(map.channels, 0.0);
  for (std::size_t pos = 0; pos < map.positions(); ++pos) {
    for (std::size_t c = 0; c < map.channels; ++c) {
      const double a = std::max(map.values[pos * map.channels + c], 0.0);
      out[c] += cfg.p == 1.0 ? a : std::pow(a, cfg.p);
    }
  }
  for (double& v : out) {
    v /= hw;
    if (cfg.p != 1.0) v = std::pow(v, 1.0 / cfg.p);
  }
  return out;
}

FeatureMap gem_grad(const FeatureMap& map, const GemConfig& cfg) {
  const auto pooled = gem_pool(map, cfg);
  const double hw = static_cast<double>(map.positions());
  FeatureMap grad(map.height, map.width, map.channels);
  for (std::size_t pos = 0; pos < map.positions(); ++pos) {
    for (std::size_t c = 0; c < map.channels; ++c) {
      const double a = map.values[pos * map.channels + c];
      const double out = pooled[c];
      double g = 0.0;
      if (cfg.p == 1.0) {
        g = a > 0.0 ? 1.0 / hw : 0.0;
      } else if (a > 0.0 && out > 0.0) {
        g = std::pow(a / out, cfg.p - 1.0) / hw;
      }
      grad.values[pos * map.channels + c] = g;
    }
  }
  return grad;
}

void MarginLossConfig::validate() const {
  if (!(margin >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "margin must be >= 0");
  }
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "scale must be > 0");
  }
}

namespace {

double target_logit(double c, const MarginLossConfig& cfg) {
  // cos(acos(c)) is not exactly c in floating point.
  if (cfg.margin == 0.0) return cfg.scale * c;
  if (cfg.variant == MarginVariant::kCos) return cfg.scale * (c - cfg.margin);
  const double theta = std::acos(c);
  if (theta + cfg.margin > std::numbers::pi) {
    return cfg.scale * (c - cfg.margin * std::sin(cfg.margin));
  }
  return cfg.scale * std::cos(theta + cfg.margin);
}

void check_cosines(std::span<const double> cosines, std::size_t target) {
  if (target >= cosines.size()) {
    throw Error(ErrorCode::kOutOfRange, "margin logits: target out of range");
  }
  for (double c : cosines) {
    if (!(c >= -1.0 && c <= 1.0)) {
      throw Error(ErrorCode::kOutOfRange,
                  "margin logits: cosine " + format_double(c) +
                      " outside [-1, 1]");
    }
  }
}

}  // namespace

std::vector<double> margin_logits(std::span<const double> cosines,
                                  std::size_t target,
                                  const MarginLossConfig& cfg) {
  cfg.validate();
  check_cosines(cosines, target);
  std::vector<double> logits(cosines.size());
  for (std::size_t k = 0; k < cosines.size(); ++k) {
    logits[k] = cfg.scale * cosines[k];
  }
  logits[target] = target_logit(cosines[target], cfg);
  return logits;
}

double margin_target_derivative(double c, const MarginLossConfig& cfg) {
  if (cfg.variant == MarginVariant::kCos) return cfg.scale;
  const double theta = std::acos(c);
  if (theta + cfg.margin > std::numbers::pi) return cfg.scale;
  // d/dc cos(acos(c) + m) = cos m + sin m * c / sqrt(1 - c^2)
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  if (s == 0.0) {
    return cfg.margin == 0.0 ? cfg.scale
                             : std::copysign(HUGE_VAL, c) * cfg.scale;
  }
  return cfg.scale * (std::cos(cfg.margin) + std::sin(cfg.margin) * c / s);
}

LossAndGrad softmax_xent(std::span<const double> logits, std::size_t target) {
  if (logits.empty() || target >= logits.size()) {
    throw Error(ErrorCode::kOutOfRange, "softmax_xent: target out of range");
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max_logit);
  const double lse = max_logit + std::log(sum);
  LossAndGrad out;
  out.loss = lse - logits[target];
  out.grad.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out.grad[k] = std::exp(logits[k] - lse) - (k == target ? 1.0 : 0.0);
  }
  return out;
}

LossAndGrad margin_loss(std::span<const double> cosines, std::size_t target,
                        const MarginLossConfig& cfg) {
  const auto logits = margin_logits(cosines, target, cfg);
  LossAndGrad out = softmax_xent(logits, target);
  for (std::size_t k = 0; k < cosines.size(); ++k) {
    out.grad[k] *= k == target ? margin_target_derivative(cosines[k], cfg)
                               : cfg.scale;
  }
  return out;
}

void ProjectionHead::validate() const {
  if (in_dim == 0 || out_dim == 0) {
    throw Error(ErrorCode::kInvalidConfig, "projection: zero dimension");
  }
  if (weight.size() != in_dim * out_dim || bias.size() != out_dim ||
      running_mean.size() != out_dim || running_var.size() != out_dim ||
      gamma.size() != out_dim || beta.size() != out_dim) {
    throw Error(ErrorCode::kCountMismatch, "projection: parameter size mismatch");
  }
  for (double v : running_var) {
    if (!(v + eps > 0.0)) {
      throw Error(ErrorCode::kInvalidConfig, "projection: variance + eps <= 0");
    }
  }
}

std::vector<double> ProjectionHead::apply(std::span<const double> pooled) const {
  validate();
  if (pooled.size() != in_dim) {
    throw Error(ErrorCode::kDimMismatch, "projection: input dim mismatch");
  }
  std::vector<double> out(out_dim);
  for (std::size_t o = 0; o < out_dim; ++o) {
    double z = bias[o];
    for (std::size_t i = 0; i < in_dim; ++i) z += weight[o * in_dim + i] * pooled[i];
    out[o] = gamma[o] * (z - running_mean[o]) / std::sqrt(running_var[o] + eps) +
             beta[o];
  }
  return out;
}

}  // namespace lmk
