#include "lmk/dataset.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lmk/util.h"

namespace lmk {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need "
              "byte swapping in the readers below");

namespace {

constexpr char kDescriptorMagic[4] = {'G', 'L', 'D', 'V'};
constexpr char kFeatureMagic[4] = {'L', 'F', 'E', 'A'};
constexpr std::uint32_t kFormatVersion = 1;

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

  void require(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      throw Error(ErrorCode::kTruncated,
                  path_ + ": truncated " + std::string(what) + " at byte " +
                      std::to_string(offset_) + " (need " + std::to_string(n) +
                      " bytes, have " + std::to_string(remaining()) + ")");
    }
  }

  template <typename T>
  T read(std::string_view what) {
    require(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }

  void read_into(void* dst, std::size_t n, std::string_view what) {
    require(n, what);
    if (n == 0) return;  // dst may be null for empty containers
    std::memcpy(dst, bytes_.data() + offset_, n);
    offset_ += n;
  }

  std::string_view take(std::size_t n, std::string_view what) {
    require(n, what);
    auto s = bytes_.substr(offset_, n);
    offset_ += n;
    return s;
  }

 private:
  std::string_view bytes_;
  std::string path_;
  std::size_t offset_ = 0;
};

template <typename T>
void append(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void append_floats(std::string& out, const std::vector<float>& values) {
  if (values.empty()) return;
  out.append(reinterpret_cast<const char*>(values.data()),
             values.size() * sizeof(float));
}

void check_magic(ByteReader& reader, const char (&magic)[4],
                 const std::string& path) {
  auto got = reader.take(4, "magic");
  if (std::memcmp(got.data(), magic, 4) != 0) {
    throw Error(ErrorCode::kMagicMismatch,
                path + ": bad magic at byte 0, expected \"" +
                    std::string(magic, 4) + "\"");
  }
  const std::size_t at = reader.offset();
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                path + ": unsupported version " + std::to_string(version) +
                    " at byte " + std::to_string(at));
  }
}

void validate_id(std::string_view id, std::string_view context) {
  if (id.empty()) {
    throw Error(ErrorCode::kEmptyId, std::string(context) + ": empty id");
  }
  if (id.find('\n') != std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(context) + ": id contains a newline");
  }
}

}  // namespace

double row_norm(std::span<const float> row) {
  double sum = 0.0;
  for (float v : row) sum += static_cast<double>(v) * v;
  return std::sqrt(sum);
}

DescriptorMatrix::DescriptorMatrix(std::size_t dim) : dim_(dim) {
  if (dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, "descriptor dim must be > 0");
  }
}

DescriptorMatrix::DescriptorMatrix(std::vector<std::string> ids,
                                   std::size_t dim, std::vector<float> data)
    : ids_(std::move(ids)), dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "descriptor dim must be > 0");
  }
  if (data_.size() != ids_.size() * dim_) {
    throw Error(ErrorCode::kCountMismatch,
                "descriptor payload has " + std::to_string(data_.size()) +
                    " values, expected " + std::to_string(ids_.size()) + "x" +
                    std::to_string(dim_));
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    validate_id(ids_[i], "descriptor row " + std::to_string(i));
    if (!index_.emplace(ids_[i], i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate descriptor id " + ids_[i]);
    }
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error(ErrorCode::kNonFinite,
                  "non-finite value in row of id " + ids_[i / dim_]);
    }
  }
}

std::optional<std::size_t> DescriptorMatrix::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void DescriptorMatrix::mark_normalized() {
  for (std::size_t i = 0; i < rows(); ++i) {
    const double n = row_norm(row(i));
    if (n != 0.0 && std::abs(n - 1.0) > kNormTolerance) {
      throw Error(ErrorCode::kInvalidArgument,
                  "row " + ids_[i] + " has norm " + format_double(n) +
                      ", not unit");
    }
  }
  normalized_ = true;
}

DescriptorMatrix DescriptorMatrix::select(
    std::span<const std::size_t> rows) const {
  std::vector<std::string> ids;
  std::vector<float> data;
  ids.reserve(rows.size());
  data.reserve(rows.size() * dim_);
  for (std::size_t r : rows) {
    if (r >= this->rows()) {
      throw Error(ErrorCode::kOutOfRange, "row index out of range");
    }
    ids.push_back(ids_[r]);
    auto src = row(r);
    data.insert(data.end(), src.begin(), src.end());
  }
  DescriptorMatrix out(std::move(ids), dim_, std::move(data));
  out.normalized_ = normalized_;
  return out;
}

bool operator==(const DescriptorMatrix& a, const DescriptorMatrix& b) {
  if (a.dim_ != b.dim_ || a.ids_ != b.ids_) return false;
  // Bitwise, so that -0.0 and +0.0 differ.
  return a.data_.size() == b.data_.size() &&
         (a.data_.empty() ||
          std::memcmp(a.data_.data(), b.data_.data(),
                      a.data_.size() * sizeof(float)) == 0);
}

void LocalFeatureSet::add(ImageFeatures image) {
  validate_id(image.id, "local features");
  if (image.descriptors.size() != image.keypoints.size() * image.d_local) {
    throw Error(ErrorCode::kCountMismatch,
                "image " + image.id + ": " +
                    std::to_string(image.keypoints.size()) +
                    " keypoints but descriptor payload of " +
                    std::to_string(image.descriptors.size()) + " values");
  }
  if (!images_.empty() && image.d_local != d_local_) {
    throw Error(ErrorCode::kDimMismatch,
                "image " + image.id + ": d_local " +
                    std::to_string(image.d_local) + " differs from set's " +
                    std::to_string(d_local_));
  }
  for (const auto& kp : image.keypoints) {
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y) ||
        !std::isfinite(kp.scale)) {
      throw Error(ErrorCode::kNonFinite,
                  "image " + image.id + ": non-finite keypoint");
    }
  }
  if (index_.count(image.id) != 0) {
    throw Error(ErrorCode::kDuplicateId, "duplicate feature image " + image.id);
  }
  d_local_ = image.d_local;
  index_.emplace(image.id, images_.size());
  images_.push_back(std::move(image));
}

const ImageFeatures* LocalFeatureSet::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &images_[it->second];
}

const ImageFeatures& LocalFeatureSet::at(std::string_view id) const {
  const ImageFeatures* f = find(id);
  if (f == nullptr) {
    throw Error(ErrorCode::kMissingFeatures,
                "no local features for image " + std::string(id));
  }
  return *f;
}

bool operator==(const LocalFeatureSet& a, const LocalFeatureSet& b) {
  if (a.images_.size() != b.images_.size() || a.d_local_ != b.d_local_) {
    return false;
  }
  for (std::size_t i = 0; i < a.images_.size(); ++i) {
    const auto& x = a.images_[i];
    const auto& y = b.images_[i];
    if (x.id != y.id || x.d_local != y.d_local ||
        x.keypoints.size() != y.keypoints.size() ||
        x.descriptors.size() != y.descriptors.size()) {
      return false;
    }
    if (!x.keypoints.empty() &&
        std::memcmp(x.keypoints.data(), y.keypoints.data(),
                    x.keypoints.size() * sizeof(Keypoint)) != 0) {
      return false;
    }
    if (!x.descriptors.empty() &&
        std::memcmp(x.descriptors.data(), y.descriptors.data(),
                    x.descriptors.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

void LabelTable::add(std::string id, std::string label) {
  if (id.empty()) throw Error(ErrorCode::kEmptyId, "label table: empty id");
  if (index_.count(id) != 0) {
    throw Error(ErrorCode::kDuplicateId, "label table: duplicate id " + id);
  }
  index_.emplace(id, entries_.size());
  entries_.emplace_back(std::move(id), std::move(label));
}

const std::string* LabelTable::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

const std::string& LabelTable::at(std::string_view id) const {
  const std::string* label = find(id);
  if (label == nullptr) {
    throw Error(ErrorCode::kMissingLabel,
                "no label for image " + std::string(id));
  }
  return *label;
}

std::map<std::string, std::size_t> LabelTable::histogram() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& [id, label] : entries_) ++counts[label];
  return counts;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path);
  return std::move(ss).str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

DescriptorMatrix load_descriptors(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader reader(bytes, path);
  check_magic(reader, kDescriptorMagic, path);
  const auto count = reader.read<std::uint64_t>("count");
  const auto dim = reader.read<std::uint32_t>("dim");
  if (dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, path + ": dim 0 in header");
  }
  const std::size_t payload_offset = reader.offset();
  const std::size_t row_bytes = static_cast<std::size_t>(dim) * sizeof(float);
  // Overflow-safe: compare row count against what the remaining bytes can hold.
  if (count > reader.remaining() / row_bytes) {
    const std::size_t full_rows = reader.remaining() / row_bytes;
    throw Error(ErrorCode::kTruncated,
                path + ": truncated payload at byte " +
                    std::to_string(payload_offset + full_rows * row_bytes) +
                    " (header promises " + std::to_string(count) +
                    " rows, file holds " + std::to_string(full_rows) + ")");
  }
  std::vector<float> data(static_cast<std::size_t>(count) * dim);
  reader.read_into(data.data(), data.size() * sizeof(float), "payload");
  if (reader.remaining() != 0) {
    throw Error(ErrorCode::kTrailingData,
                path + ": " + std::to_string(reader.remaining()) +
                    " unexpected bytes after payload at byte " +
                    std::to_string(reader.offset()));
  }

  const std::string id_path = path + ".ids";
  const std::string id_text = read_file(id_path);
  std::vector<std::string> ids;
  std::size_t start = 0;
  while (start < id_text.size()) {
    std::size_t end = id_text.find('\n', start);
    if (end == std::string::npos) end = id_text.size();
    std::string id = id_text.substr(start, end - start);
    if (id.empty()) {
      throw Error(ErrorCode::kEmptyId,
                  id_path + ": empty id on line " +
                      std::to_string(ids.size() + 1));
    }
    ids.push_back(std::move(id));
    start = end + 1;
  }
  if (ids.size() != count) {
    throw Error(ErrorCode::kIdCountMismatch,
                id_path + ": " + std::to_string(ids.size()) +
                    " ids for " + std::to_string(count) + " rows");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(ErrorCode::kNonFinite,
                  path + ": non-finite value for id " + ids[i / dim] +
                      " at byte " +
                      std::to_string(payload_offset + i * sizeof(float)));
    }
  }
  return DescriptorMatrix(std::move(ids), dim, std::move(data));
}

void save_descriptors(const DescriptorMatrix& m, const std::string& path) {
  if (m.dim() > UINT32_MAX) {
    throw Error(ErrorCode::kInvalidArgument, "dim does not fit in u32");
  }
  std::string out;
  out.reserve(20 + m.data().size() * sizeof(float));
  out.append(kDescriptorMagic, 4);
  append<std::uint32_t>(out, kFormatVersion);
  append<std::uint64_t>(out, m.rows());
  append<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  append_floats(out, m.data());

  std::string ids;
  for (const auto& id : m.ids()) {
    ids += id;
    ids += '\n';
  }
  write_file(path, out);
  write_file(path + ".ids", ids);
}

LocalFeatureSet load_local_features(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader reader(bytes, path);
  check_magic(reader, kFeatureMagic, path);
  const auto image_count = reader.read<std::uint64_t>("image count");
  LocalFeatureSet set;
  for (std::uint64_t n = 0; n < image_count; ++n) {
    ImageFeatures image;
    const auto id_len = reader.read<std::uint16_t>("id length");
    image.id = std::string(reader.take(id_len, "image id"));
    const auto kp_count = reader.read<std::uint32_t>("keypoint count");
    const auto d_local = reader.read<std::uint32_t>("d_local");
    image.d_local = d_local;
    image.keypoints.resize(kp_count);
    static_assert(sizeof(Keypoint) == 4 * sizeof(float));
    reader.read_into(image.keypoints.data(), kp_count * sizeof(Keypoint),
                     "keypoints of image " + image.id);
    const std::size_t desc_bytes =
        static_cast<std::size_t>(kp_count) * d_local * sizeof(float);
    if (reader.remaining() < desc_bytes) {
      const std::size_t rows =
          d_local == 0 ? 0 : reader.remaining() / (d_local * sizeof(float));
      throw Error(ErrorCode::kCountMismatch,
                  path + ": image " + image.id + " declares " +
                      std::to_string(kp_count) + " keypoints but only " +
                      std::to_string(rows) +
                      " descriptor rows are present at byte " +
                      std::to_string(reader.offset()));
    }
    image.descriptors.resize(static_cast<std::size_t>(kp_count) * d_local);
    reader.read_into(image.descriptors.data(), desc_bytes, "descriptors");
    set.add(std::move(image));
  }
  if (reader.remaining() != 0) {
    throw Error(ErrorCode::kTrailingData,
                path + ": unexpected bytes after last image at byte " +
                    std::to_string(reader.offset()));
  }
  return set;
}

void save_local_features(const LocalFeatureSet& set, const std::string& path) {
  std::string out;
  out.append(kFeatureMagic, 4);
  append<std::uint32_t>(out, kFormatVersion);
  append<std::uint64_t>(out, set.size());
  for (const auto& image : set.images()) {
    if (image.id.size() > UINT16_MAX) {
      throw Error(ErrorCode::kInvalidArgument, "image id too long: " + image.id);
    }
    append<std::uint16_t>(out, static_cast<std::uint16_t>(image.id.size()));
    out += image.id;
    append<std::uint32_t>(out, static_cast<std::uint32_t>(image.size()));
    append<std::uint32_t>(out, static_cast<std::uint32_t>(image.d_local));
    if (!image.keypoints.empty()) {
      out.append(reinterpret_cast<const char*>(image.keypoints.data()),
                 image.keypoints.size() * sizeof(Keypoint));
    }
    append_floats(out, image.descriptors);
  }
  write_file(path, out);
}

LabelTable load_labels(const std::string& path) {
  const std::string text = read_file(path);
  LabelTable table;
  std::size_t start = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (!header_seen) {
      if (line != "id,landmark_id") {
        throw Error(ErrorCode::kMissingHeader,
                    path + ": expected header \"id,landmark_id\"");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos ||
        line.find(',', comma + 1) != std::string_view::npos) {
      throw Error(ErrorCode::kMalformedRow,
                  path + ": line " + std::to_string(line_no) +
                      " must have exactly two fields");
    }
    std::string id(line.substr(0, comma));
    std::string label(line.substr(comma + 1));
    if (id.empty()) {
      throw Error(ErrorCode::kEmptyId,
                  path + ": empty id on line " + std::to_string(line_no));
    }
    if (table.find(id) != nullptr) {
      throw Error(ErrorCode::kDuplicateId,
                  path + ": duplicate id " + id + " on line " +
                      std::to_string(line_no));
    }
    table.add(std::move(id), std::move(label));
  }
  if (!header_seen) {
    throw Error(ErrorCode::kMissingHeader, path + ": empty file, no header");
  }
  return table;
}

void save_labels(const LabelTable& labels, const std::string& path) {
  std::string out = "id,landmark_id\n";
  for (const auto& [id, label] : labels.entries()) {
    out += id;
    out += ',';
    out += label;
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace lmk
