#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lmk {

// N rows of dim-dimensional global descriptors with aligned image ids.
// Payload is row-major f32; arithmetic on it is done in f64.
class DescriptorMatrix {
 public:
  // Zero-row matrix of the given dimension.
  explicit DescriptorMatrix(std::size_t dim = 1);
  // Validates: unique non-empty ids, dim > 0, data.size() == ids.size()*dim,
  // all entries finite.
  DescriptorMatrix(std::vector<std::string> ids, std::size_t dim,
                   std::vector<float> data);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return ids_.empty(); }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<float>& data() const { return data_; }
  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::optional<std::size_t> find(std::string_view id) const;

  bool normalized() const { return normalized_; }
  // Sets the normalized flag after checking every row has norm 1 +- 1e-6
  // (all-zero rows are tolerated). Throws Error(kInvalidArgument) otherwise.
  void mark_normalized();

  // Rows selected by index, in the given order.
  DescriptorMatrix select(std::span<const std::size_t> rows) const;

  friend bool operator==(const DescriptorMatrix& a, const DescriptorMatrix& b);

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 1;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
  bool normalized_ = false;
};

inline constexpr double kNormTolerance = 1e-6;

double row_norm(std::span<const float> row);

struct Keypoint {
  float x = 0.f;
  float y = 0.f;
  float scale = 1.f;
  // NaN when the extractor supplied no attention score.
  float attention = std::nanf("");

  bool has_attention() const { return !std::isnan(attention); }
};

struct ImageFeatures {
  std::string id;
  std::size_t d_local = 0;
  std::vector<Keypoint> keypoints;
  std::vector<float> descriptors;  // keypoints.size() x d_local, row-major

  std::size_t size() const { return keypoints.size(); }
  std::span<const float> descriptor(std::size_t i) const {
    return {descriptors.data() + i * d_local, d_local};
  }
};

// Local features for a collection of images, all sharing d_local.
class LocalFeatureSet {
 public:
  LocalFeatureSet() = default;

  // Validates keypoint/descriptor counts, finite coordinates, a shared
  // d_local, and unique ids.
  void add(ImageFeatures image);

  std::size_t size() const { return images_.size(); }
  std::size_t d_local() const { return d_local_; }
  const std::vector<ImageFeatures>& images() const { return images_; }
  const ImageFeatures* find(std::string_view id) const;
  // Throws Error(kMissingFeatures) when absent.
  const ImageFeatures& at(std::string_view id) const;

  friend bool operator==(const LocalFeatureSet& a, const LocalFeatureSet& b);

 private:
  std::vector<ImageFeatures> images_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t d_local_ = 0;
};

// image id -> landmark label token. Insertion order is preserved.
class LabelTable {
 public:
  LabelTable() = default;

  void add(std::string id, std::string label);
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }
  const std::string* find(std::string_view id) const;
  // Throws Error(kMissingLabel) when absent.
  const std::string& at(std::string_view id) const;

  // label -> number of images carrying it.
  std::map<std::string, std::size_t> histogram() const;

  friend bool operator==(const LabelTable& a, const LabelTable& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct RankedEntry {
  std::string id;
  double score = 0.0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

// One query's retrieval result. Order is authoritative; scores are advisory
// once a list has been re-ranked.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

// One query's recognition result.
struct Prediction {
  std::string query_id;
  std::string label;
  double confidence = 0.0;
  // s_l for every label that received a vote, ordered by label token.
  std::vector<std::pair<std::string, double>> label_scores;
  // Confidence before distractor suppression, when it was overwritten.
  std::optional<double> original_confidence;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Binary descriptor file "GLDV" plus "<path>.ids" sidecar.
DescriptorMatrix load_descriptors(const std::string& path);
void save_descriptors(const DescriptorMatrix& m, const std::string& path);

// Binary local-feature file "LFEA".
LocalFeatureSet load_local_features(const std::string& path);
void save_local_features(const LocalFeatureSet& set, const std::string& path);

// CSV "id,landmark_id".
LabelTable load_labels(const std::string& path);
void save_labels(const LabelTable& labels, const std::string& path);

// Raw file helpers shared by the loaders.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace lmk
