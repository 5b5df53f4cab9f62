#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lmk {

// Dense H x W x C activation map, channel-fastest (HWC) layout.
struct FeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(std::size_t h, std::size_t w, std::size_t c)
      : height(h), width(w), channels(c), values(h * w * c, 0.0) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return values[(y * width + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return values[(y * width + x) * channels + c];
  }
  std::size_t positions() const { return height * width; }
};

struct GemConfig {
  double p = 3.0;  // fixed, never learned
};

// Generalized mean per channel over spatial positions:
// ((1/HW) sum max(a, 0)^p)^(1/p).
std::vector<double> gem_pool(const FeatureMap& map, const GemConfig& cfg);

// d out_c / d a_{h,w,c} = (1/HW) a^(p-1) out_c^(1-p); zero at a <= 0 and for
// channels whose output is zero. Returned in the map's layout.
FeatureMap gem_grad(const FeatureMap& map, const GemConfig& cfg);

enum class MarginVariant { kArc, kCos };

struct MarginLossConfig {
  double margin = 0.3;
  double scale = 30.0;
  MarginVariant variant = MarginVariant::kArc;

  void validate() const;
};

// scale * cos for non-target classes; the target gets the additive angular
// (arc) or additive cosine (cos) margin. Arc falls back to
// scale * (cos - m sin m) when theta + m > pi.
std::vector<double> margin_logits(std::span<const double> cosines,
                                  std::size_t target,
                                  const MarginLossConfig& cfg);

// d logit_target / d cos_target (other logits have derivative scale).
double margin_target_derivative(double cosine, const MarginLossConfig& cfg);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

// Stable log-sum-exp cross entropy with gradient softmax - onehot.
LossAndGrad softmax_xent(std::span<const double> logits, std::size_t target);

// Loss of margin_logits + softmax_xent, with gradient w.r.t. the cosines.
LossAndGrad margin_loss(std::span<const double> cosines, std::size_t target,
                        const MarginLossConfig& cfg);

// Post-pooling reduction contract: fully connected projection to out_dim
// followed by 1-d batch normalization in inference form.
struct ProjectionHead {
  std::size_t in_dim = 0;
  std::size_t out_dim = 512;
  std::vector<double> weight;  // out_dim x in_dim, row-major
  std::vector<double> bias;    // out_dim
  std::vector<double> running_mean;
  std::vector<double> running_var;
  std::vector<double> gamma;
  std::vector<double> beta;
  double eps = 1e-5;

  void validate() const;
  std::vector<double> apply(std::span<const double> pooled) const;
};

}  // namespace lmk
