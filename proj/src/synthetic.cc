#include "lmk/synthetic.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "lmk/geometry.h"
#include "lmk/util.h"

namespace lmk {

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidConfig, "synthetic: " + what);
  };
  if (num_labels == 0) fail("num_labels must be >= 1");
  if (dim == 0) fail("dim must be >= 1");
  if (!(spread >= 0.0)) fail("spread must be >= 0");
  if (!(distractor_fraction >= 0.0 && distractor_fraction < 1.0)) {
    fail("distractor_fraction must be in [0, 1)");
  }
  if (index_per_label == 0 && test_per_label > 0) {
    fail("index_per_label must be >= 1 when there are test images");
  }
  if (d_local == 0) fail("d_local must be >= 1");
  if (!(keypoint_noise_px >= 0.0) || !(descriptor_noise >= 0.0)) {
    fail("noise levels must be >= 0");
  }
  if (!(image_size > 0.0)) fail("image_size must be > 0");
}

namespace {

using Rng = std::mt19937_64;

Rng make_rng(std::uint64_t seed, std::string_view stream) {
  return Rng(splitmix64(fnv1a64(stream, splitmix64(seed))));
}

std::vector<double> unit_gaussian(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

struct Template {
  std::vector<Point2> points;
  std::vector<std::vector<double>> descriptors;
};

Template make_template(Rng& rng, const SyntheticConfig& cfg) {
  std::uniform_real_distribution<double> coord(0.1 * cfg.image_size,
                                               0.9 * cfg.image_size);
  Template t;
  for (std::size_t i = 0; i < cfg.keypoints_per_image; ++i) {
    t.points.push_back({coord(rng), coord(rng)});
    t.descriptors.push_back(unit_gaussian(rng, cfg.d_local));
  }
  return t;
}

ImageFeatures render_features(const std::string& id, const Template& tmpl,
                              const SyntheticConfig& cfg) {
  Rng rng = make_rng(cfg.seed, "features/" + id);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::normal_distribution<double> normal(0.0, 1.0);

  const double theta = uniform(-0.4, 0.4);
  const double scale = uniform(0.8, 1.2);
  const double sx = scale * uniform(0.9, 1.1);
  const double sy = scale * uniform(0.9, 1.1);
  const double shear = uniform(-0.1, 0.1);
  const double c = std::cos(theta), s = std::sin(theta);
  // A = R * [[sx, shear], [0, sy]]
  const double a11 = c * sx, a12 = c * shear - s * sy;
  const double a21 = s * sx, a22 = s * shear + c * sy;
  const double center = cfg.image_size / 2.0;
  const double tx = uniform(-0.1, 0.1) * cfg.image_size;
  const double ty = uniform(-0.1, 0.1) * cfg.image_size;

  struct Item {
    Keypoint kp;
    std::vector<float> desc;
  };
  std::vector<Item> items;
  auto noisy_desc = [&](const std::vector<double>& base) {
    std::vector<double> d(base);
    double norm = 0.0;
    for (double& v : d) {
      v += cfg.descriptor_noise * normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    std::vector<float> out(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      out[k] = static_cast<float>(d[k] / norm);
    }
    return out;
  };
  for (std::size_t i = 0; i < tmpl.points.size(); ++i) {
    const double px = tmpl.points[i].x - center;
    const double py = tmpl.points[i].y - center;
    Item item;
    item.kp.x = static_cast<float>(a11 * px + a12 * py + center + tx +
                                   cfg.keypoint_noise_px * normal(rng));
    item.kp.y = static_cast<float>(a21 * px + a22 * py + center + ty +
                                   cfg.keypoint_noise_px * normal(rng));
    item.kp.scale = static_cast<float>(scale);
    item.kp.attention = static_cast<float>(unit(rng));
    item.desc = noisy_desc(tmpl.descriptors[i]);
    items.push_back(std::move(item));
  }
  for (std::size_t i = 0; i < cfg.outliers_per_image; ++i) {
    Item item;
    item.kp.x = static_cast<float>(uniform(0.0, cfg.image_size));
    item.kp.y = static_cast<float>(uniform(0.0, cfg.image_size));
    item.kp.scale = static_cast<float>(uniform(0.5, 2.0));
    item.kp.attention = static_cast<float>(unit(rng));
    item.desc = noisy_desc(unit_gaussian(rng, cfg.d_local));
    items.push_back(std::move(item));
  }
  std::shuffle(items.begin(), items.end(), rng);

  ImageFeatures f;
  f.id = id;
  f.d_local = cfg.d_local;
  for (auto& item : items) {
    f.keypoints.push_back(item.kp);
    f.descriptors.insert(f.descriptors.end(), item.desc.begin(),
                         item.desc.end());
  }
  return f;
}

class MatrixBuilder {
 public:
  explicit MatrixBuilder(std::size_t dim) : dim_(dim) {}

  void add(const std::string& id, const std::vector<double>& center,
           double spread, std::uint64_t seed) {
    Rng rng = make_rng(seed, "descriptor/" + id);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(center);
    const double sigma = spread / std::sqrt(static_cast<double>(dim_));
    for (double& x : v) x += sigma * normal(rng);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    ids_.push_back(id);
    for (double x : v) data_.push_back(static_cast<float>(x / norm));
  }

  DescriptorMatrix build() {
    DescriptorMatrix m(std::move(ids_), dim_, std::move(data_));
    m.mark_normalized();
    return m;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
};

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  MatrixBuilder train(cfg.dim), index(cfg.dim), test(cfg.dim);
  SyntheticData out;

  std::vector<std::vector<double>> centers;
  std::vector<Template> templates;
  for (std::size_t l = 0; l < cfg.num_labels; ++l) {
    Rng rng = make_rng(cfg.seed, "label/" + std::to_string(l));
    centers.push_back(unit_gaussian(rng, cfg.dim));
    templates.push_back(make_template(rng, cfg));
  }
  auto unique_template = [&](const std::string& id) {
    Rng rng = make_rng(cfg.seed, "unique/" + id);
    return make_template(rng, cfg);
  };

  std::vector<ImageFeatures> features;
  for (std::size_t l = 0; l < cfg.num_labels; ++l) {
    const std::string label = std::to_string(l);
    for (std::size_t j = 0; j < cfg.train_per_label; ++j) {
      const std::string id = "train_" + label + "_" + std::to_string(j);
      train.add(id, centers[l], cfg.spread, cfg.seed);
      out.train_labels.add(id, label);
      features.push_back(render_features(id, templates[l], cfg));
    }
    for (std::size_t j = 0; j < cfg.inconsistent_per_label; ++j) {
      const std::string id = "train_" + label + "_x" + std::to_string(j);
      train.add(id, centers[l], cfg.spread, cfg.seed);
      out.train_labels.add(id, label);
      features.push_back(render_features(id, unique_template(id), cfg));
    }
  }

  const std::size_t landmark_tests = cfg.num_labels * cfg.test_per_label;
  const auto distractor_tests = static_cast<std::size_t>(std::llround(
      cfg.distractor_fraction * static_cast<double>(landmark_tests) /
      (1.0 - cfg.distractor_fraction)));
  std::vector<double> distractor_center;
  std::optional<Template> distractor_template;
  if (cfg.distractor_shared_geometry) {
    Rng rng = make_rng(cfg.seed, "template/distractor");
    distractor_template = make_template(rng, cfg);
  }
  auto distractor_features = [&](const std::string& id) {
    return render_features(
        id, distractor_template ? *distractor_template : unique_template(id), cfg);
  };
  if (cfg.distractor_train > 0) {
    Rng rng = make_rng(cfg.seed, "label/distractor");
    distractor_center = unit_gaussian(rng, cfg.dim);
    out.distractor_label = std::to_string(cfg.num_labels);
    for (std::size_t j = 0; j < cfg.distractor_train; ++j) {
      const std::string id = "train_d_" + std::to_string(j);
      train.add(id, distractor_center, cfg.spread, cfg.seed);
      out.train_labels.add(id, out.distractor_label);
      features.push_back(distractor_features(id));
    }
  }

  std::vector<std::vector<std::string>> index_by_label(cfg.num_labels);
  for (std::size_t l = 0; l < cfg.num_labels; ++l) {
    const std::string label = std::to_string(l);
    for (std::size_t j = 0; j < cfg.index_per_label; ++j) {
      const std::string id = "index_" + label + "_" + std::to_string(j);
      index.add(id, centers[l], cfg.spread, cfg.seed);
      out.index_labels.add(id, label);
      index_by_label[l].push_back(id);
      features.push_back(render_features(id, templates[l], cfg));
    }
  }

  for (std::size_t l = 0; l < cfg.num_labels; ++l) {
    const std::string label = std::to_string(l);
    for (std::size_t j = 0; j < cfg.test_per_label; ++j) {
      const std::string id = "test_" + label + "_" + std::to_string(j);
      test.add(id, centers[l], cfg.spread, cfg.seed);
      out.test_truth.add(id, label);
      out.relevance.add(id, index_by_label[l]);
      features.push_back(render_features(id, templates[l], cfg));
    }
  }
  for (std::size_t j = 0; j < distractor_tests; ++j) {
    const std::string id = "test_d_" + std::to_string(j);
    if (distractor_center.empty()) {
      Rng rng = make_rng(cfg.seed, "direction/" + id);
      test.add(id, unit_gaussian(rng, cfg.dim), 0.0, cfg.seed);
    } else {
      test.add(id, distractor_center, cfg.spread, cfg.seed);
    }
    out.test_truth.add(id, std::nullopt);
    out.relevance.add(id, {});
    features.push_back(distractor_features(id));
  }

  out.train = train.build();
  out.index = index.build();
  out.test = test.build();
  for (auto& f : features) out.features.add(std::move(f));
  return out;
}

}  // namespace lmk
