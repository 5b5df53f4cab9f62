#include <cstring>
#include <fstream>

#include "doctest.h"
#include "lmk/dataset.h"
#include "lmk/io.h"
#include "lmk/metrics.h"
#include "lmk/synthetic.h"
#include "lmk/util.h"
#include "support.h"

using namespace lmk;
using lmk_test::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected lmk::Error");
  return ErrorCode::kIo;
}

// Writer built from the format definition alone: magic, version, count, dim,
// little-endian f32 rows.
std::string reference_gldv(std::uint64_t count, std::uint32_t dim,
                           const std::vector<float>& payload) {
  std::string out = "GLDV";
  auto put = [&out](const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
  };
  const std::uint32_t version = 1;
  put(&version, 4);
  put(&count, 8);
  put(&dim, 4);
  put(payload.data(), payload.size() * 4);
  return out;
}

}  // namespace

TEST_CASE("descriptor file: two rows round-trip with ids") {
  TempDir dir;
  const auto m = lmk_test::matrix({"a", "b"}, {{1, 0, 0}, {0, 1, 0}});
  save_descriptors(m, dir.file("m.gldv"));
  const auto back = load_descriptors(dir.file("m.gldv"));
  CHECK(back == m);
  CHECK(back.ids() == std::vector<std::string>{"a", "b"});
  CHECK(read_file(dir.file("m.gldv")) == reference_gldv(2, 3, {1, 0, 0, 0, 1, 0}));
}

TEST_CASE("descriptor file: truncation is reported at the first missing row") {
  TempDir dir;
  write_file(dir.file("t.gldv"), reference_gldv(2, 3, {1, 0, 0}));
  write_file(dir.file("t.gldv.ids"), "a\nb\n");
  try {
    load_descriptors(dir.file("t.gldv"));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTruncated);
    // 20-byte header + one 12-byte row.
    CHECK(std::string(e.what()).find("byte 32") != std::string::npos);
  }
}

TEST_CASE("descriptor file: header and sidecar errors") {
  TempDir dir;
  const auto p = dir.file("x.gldv");
  write_file(p, "NOPE" + reference_gldv(0, 3, {}).substr(4));
  write_file(p + ".ids", "");
  CHECK(code_of([&] { load_descriptors(p); }) == ErrorCode::kMagicMismatch);

  auto bad_version = reference_gldv(0, 3, {});
  bad_version[4] = 2;
  write_file(p, bad_version);
  CHECK(code_of([&] { load_descriptors(p); }) == ErrorCode::kUnsupportedVersion);

  write_file(p, reference_gldv(1, 3, {1, 0, 0}) + "x");
  write_file(p + ".ids", "a\n");
  CHECK(code_of([&] { load_descriptors(p); }) == ErrorCode::kTrailingData);

  write_file(p, reference_gldv(1, 3, {1, 0, 0}));
  write_file(p + ".ids", "a\nb\n");
  CHECK(code_of([&] { load_descriptors(p); }) == ErrorCode::kIdCountMismatch);

  write_file(p, reference_gldv(1, 2, {1, std::nanf("")}));
  write_file(p + ".ids", "a\n");
  try {
    load_descriptors(p);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
    CHECK(std::string(e.what()).find("id a at byte 24") != std::string::npos);
  }
  CHECK(code_of([&] { load_descriptors(dir.file("missing.gldv")); }) == ErrorCode::kIo);
}

TEST_CASE("descriptor matrix rejects duplicate and empty ids") {
  CHECK(code_of([] { lmk_test::matrix({"a", "a"}, {{1}, {2}}); }) == ErrorCode::kDuplicateId);
  CHECK(code_of([] { lmk_test::matrix({""}, {{1}}); }) == ErrorCode::kEmptyId);
  CHECK(code_of([] { DescriptorMatrix({"a"}, 2, {1, 2, 3}); }) == ErrorCode::kCountMismatch);
}

TEST_CASE("descriptor file: empty, 1x1, and random 100x64 round-trip bit-exactly") {
  TempDir dir;
  const DescriptorMatrix empty(512);
  save_descriptors(empty, dir.file("e.gldv"));
  const auto e = load_descriptors(dir.file("e.gldv"));
  CHECK(e.rows() == 0);
  CHECK(e.dim() == 512);

  const auto one = lmk_test::matrix({"x"}, {{0.5f}});
  save_descriptors(one, dir.file("one.gldv"));
  CHECK(load_descriptors(dir.file("one.gldv")) == one);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-3.f, 3.f);
  std::vector<float> data(100 * 64);
  for (auto& x : data) x = u(rng);
  const DescriptorMatrix m(lmk_test::make_ids("r", 100), 64, data);
  save_descriptors(m, dir.file("r.gldv"));
  const std::string bytes = read_file(dir.file("r.gldv"));
  CHECK(bytes == reference_gldv(100, 64, data));
  const auto back = load_descriptors(dir.file("r.gldv"));
  CHECK(std::memcmp(back.data().data(), data.data(), data.size() * 4) == 0);
}

TEST_CASE("descriptor file: 1000x512 payload checksum survives save and load") {
  TempDir dir;
  std::mt19937_64 rng(11);
  const auto m = lmk_test::random_unit_matrix(rng, 1000, 512, "img");
  const std::string reference = reference_gldv(1000, 512, m.data());
  save_descriptors(m, dir.file("big.gldv"));
  CHECK(fnv1a64(read_file(dir.file("big.gldv"))) == fnv1a64(reference));
  const auto back = load_descriptors(dir.file("big.gldv"));
  const std::string_view payload(reinterpret_cast<const char*>(back.data().data()),
                                 back.data().size() * 4);
  CHECK(fnv1a64(payload) == fnv1a64(std::string_view(reference).substr(20)));
}

TEST_CASE("label table parsing") {
  TempDir dir;
  write_file(dir.file("l.csv"), "id,landmark_id\na,1\nb,2");
  const auto t = load_labels(dir.file("l.csv"));
  CHECK(t.at("a") == "1");
  CHECK(t.at("b") == "2");
  CHECK(code_of([&] { t.at("zzz"); }) == ErrorCode::kMissingLabel);

  write_file(dir.file("d.csv"), "id,landmark_id\na,1\na,2\n");
  CHECK(code_of([&] { load_labels(dir.file("d.csv")); }) == ErrorCode::kDuplicateId);

  write_file(dir.file("h.csv"), "a,1\nb,2\n");
  CHECK(code_of([&] { load_labels(dir.file("h.csv")); }) == ErrorCode::kMissingHeader);

  write_file(dir.file("m.csv"), "id,landmark_id\na,1,9\n");
  CHECK(code_of([&] { load_labels(dir.file("m.csv")); }) == ErrorCode::kMalformedRow);

  write_file(dir.file("three.csv"), "id,landmark_id\nx,1\ny,1\nz,2\n");
  const auto hist = load_labels(dir.file("three.csv")).histogram();
  CHECK(hist == std::map<std::string, std::size_t>{{"1", 2}, {"2", 1}});

  LabelTable empty;
  save_labels(empty, dir.file("empty.csv"));
  CHECK(load_labels(dir.file("empty.csv")) == empty);
}

TEST_CASE("local features: parse, count mismatch, empty set") {
  TempDir dir;
  LocalFeatureSet set;
  ImageFeatures img;
  img.id = "q";
  img.d_local = 40;
  for (int i = 0; i < 3; ++i) img.keypoints.push_back({float(i), float(2 * i), 1.f, 0.5f});
  img.descriptors.assign(3 * 40, 0.25f);
  set.add(img);
  save_local_features(set, dir.file("f.lfea"));
  const auto back = load_local_features(dir.file("f.lfea"));
  REQUIRE(back.size() == 1);
  CHECK(back.at("q").size() == 3);
  CHECK(back == set);

  // Cut one descriptor row off the end: 3 keypoints, 2 descriptor rows.
  std::string bytes = read_file(dir.file("f.lfea"));
  bytes.resize(bytes.size() - 40 * 4);
  write_file(dir.file("short.lfea"), bytes);
  CHECK(code_of([&] { load_local_features(dir.file("short.lfea")); }) ==
        ErrorCode::kCountMismatch);

  save_local_features(LocalFeatureSet{}, dir.file("empty.lfea"));
  CHECK(load_local_features(dir.file("empty.lfea")).size() == 0);
}

TEST_CASE("local features: missing attention survives as NaN") {
  TempDir dir;
  LocalFeatureSet set;
  ImageFeatures img;
  img.id = "a";
  img.d_local = 2;
  img.keypoints.push_back({1.f, 2.f, 3.f});
  img.descriptors = {0.6f, 0.8f};
  set.add(img);
  save_local_features(set, dir.file("a.lfea"));
  const auto back = load_local_features(dir.file("a.lfea"));
  CHECK_FALSE(back.at("a").keypoints[0].has_attention());
}

TEST_CASE("synthetic generator: determinism and fixture shape") {
  TempDir dir;
  SyntheticConfig cfg;
  cfg.num_labels = 2;
  cfg.train_per_label = 3;
  cfg.dim = 8;
  cfg.seed = 7;
  auto dump = [&](const std::string& tag) {
    const auto d = generate_synthetic(cfg);
    save_descriptors(d.train, dir.file(tag + "train.gldv"));
    save_descriptors(d.test, dir.file(tag + "test.gldv"));
    save_local_features(d.features, dir.file(tag + "f.lfea"));
    return read_file(dir.file(tag + "train.gldv")) + read_file(dir.file(tag + "test.gldv")) +
           read_file(dir.file(tag + "f.lfea"));
  };
  CHECK(dump("a") == dump("b"));

  const auto d = generate_synthetic(cfg);
  CHECK(d.train.rows() == 6);
  for (const auto& q : d.relevance.query_ids()) {
    CHECK(d.relevance.find(q)->relevant.size() >= 1);
  }
}

TEST_CASE("synthetic generator: zero spread collapses each label") {
  SyntheticConfig cfg;
  cfg.spread = 0.0;
  cfg.dim = 16;
  const auto d = generate_synthetic(cfg);
  for (std::size_t i = 0; i < d.train.rows(); ++i) {
    for (std::size_t j = i + 1; j < d.train.rows(); ++j) {
      const double dist = lmk_test::oracle_sq_dist(d.train, i, d.train, j);
      if (d.train_labels.at(d.train.id(i)) == d.train_labels.at(d.train.id(j))) {
        CHECK(dist == 0.0);
      } else {
        CHECK(dist > 0.0);
      }
    }
  }
}

TEST_CASE("csv formats round-trip including empty containers") {
  TempDir dir;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);

  std::vector<RankedList> lists;
  for (int q = 0; q < 5; ++q) {
    RankedList l;
    l.query_id = "q" + std::to_string(q);
    for (int i = 0; i < q; ++i) l.entries.push_back({"i" + std::to_string(i), 0.0});
    lists.push_back(l);
  }
  save_ranked_csv(lists, dir.file("r.csv"));
  CHECK(load_ranked_csv(dir.file("r.csv")) == lists);
  save_ranked_csv({}, dir.file("r0.csv"));
  CHECK(load_ranked_csv(dir.file("r0.csv")).empty());

  std::vector<Prediction> preds;
  for (int q = 0; q < 50; ++q) {
    Prediction p;
    p.query_id = "t" + std::to_string(q);
    p.label = std::to_string(q % 7);
    p.confidence = u(rng) * std::pow(10.0, q % 9 - 4);
    preds.push_back(p);
  }
  save_predictions_csv(preds, dir.file("p.csv"));
  const auto back = load_predictions_csv(dir.file("p.csv"));
  REQUIRE(back.size() == preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(back[i].query_id == preds[i].query_id);
    CHECK(back[i].label == preds[i].label);
    CHECK(std::memcmp(&back[i].confidence, &preds[i].confidence, sizeof(double)) == 0);
  }
  save_predictions_csv({}, dir.file("p0.csv"));
  CHECK(load_predictions_csv(dir.file("p0.csv")).empty());
}

TEST_CASE("relevance and recognition truth files") {
  TempDir dir;
  write_file(dir.file("rel.csv"), "id,images,ignore\nq1,a b,c\nq2,,\n");
  const auto rel = load_relevance_csv(dir.file("rel.csv"));
  CHECK(rel.find("q1")->relevant.count("b") == 1);
  CHECK(rel.find("q1")->ignore.count("c") == 1);
  CHECK(rel.find("q2")->relevant.empty());

  write_file(dir.file("truth.csv"), "id,landmark_id\nt1,5\nt2,\n");
  const auto truth = load_recognition_truth_csv(dir.file("truth.csv"));
  CHECK(truth.size() == 2);
  CHECK(truth.labeled_count() == 1);
  CHECK_FALSE(truth.find("t2")->has_value());
  save_recognition_truth_csv(truth, dir.file("truth2.csv"));
  CHECK(read_file(dir.file("truth2.csv")) == read_file(dir.file("truth.csv")));
}
