#include "doctest.h"
#include "lmk/metrics.h"
#include "lmk/rerank.h"
#include "lmk/util.h"
#include "support.h"

using namespace lmk;

namespace {

Prediction pred(std::string id, std::string label, double conf) {
  Prediction p;
  p.query_id = std::move(id);
  p.label = std::move(label);
  p.confidence = conf;
  return p;
}

RankedList ranked(std::string q, std::vector<std::string> ids) {
  RankedList l;
  l.query_id = std::move(q);
  double s = 1.0;
  for (auto& id : ids) {
    l.entries.push_back({std::move(id), s});
    s -= 0.01;
  }
  return l;
}

std::vector<std::string> ids_of(const RankedList& l) {
  std::vector<std::string> out;
  for (const auto& e : l.entries) out.push_back(e.id);
  return out;
}

}  // namespace

TEST_CASE("classify_entries") {
  PredictionMap idx = index_predictions({pred("i1", "L", 1), pred("i2", "X", 1), pred("i3", "L", 1),
                                         pred("i4", "Y", 1), pred("i5", "L", 1)});
  const auto part = classify_entries(ranked("q", {"i1", "i2", "i3", "i4", "i5"}), pred("q", "L", 1), idx);
  CHECK(part.positives.size() == 3);
  CHECK(part.positives[0].id == "i1");
  CHECK(part.positives[1].id == "i3");
  CHECK(part.positives[2].id == "i5");

  CHECK(classify_entries(ranked("q", {"i1", "i3"}), pred("q", "L", 1), idx).negatives.empty());
  CHECK(classify_entries(ranked("q", {"i1", "i3"}), pred("q", "W", 1), idx).positives.empty());
  CHECK_THROWS_AS(classify_entries(ranked("q", {"nope"}), pred("q", "L", 1), idx), Error);
}

TEST_CASE("rerank_query: stable partition and appended positives") {
  PredictionMap idx = index_predictions({pred("P1", "L", 1), pred("N1", "X", 1), pred("P2", "L", 1),
                                         pred("N2", "X", 1), pred("P3", "L", 1)});
  const auto out = rerank_query(ranked("q", {"P1", "N1", "P2", "N2", "P3"}), pred("q", "L", 1), idx);
  CHECK(ids_of(out) == std::vector<std::string>{"P1", "P2", "P3", "N1", "N2"});
  CHECK(out.entries[3].score == ranked("q", {"P1", "N1"}).entries[1].score);

  const auto fixed = ranked("q", {"P1", "P2", "P3"});
  CHECK(rerank_query(fixed, pred("q", "L", 1), idx) == fixed);

  PredictionMap idx2 = index_predictions({pred("P1", "L", 1), pred("N1", "X", 1), pred("P2", "L", 0.7)});
  RerankOptions cap3;
  cap3.cap = 3;
  const auto app = rerank_query(ranked("q", {"P1", "N1"}), pred("q", "L", 1), idx2, cap3);
  CHECK(ids_of(app) == std::vector<std::string>{"P1", "P2", "N1"});
  CHECK(app.entries[1].score == 0.7);
}

TEST_CASE("rerank_query: appended order is confidence then id, then cap") {
  PredictionMap idx = index_predictions({pred("a", "L", 0.5), pred("b", "L", 0.9), pred("c", "L", 0.5),
                                         pred("n", "X", 1)});
  const auto out = rerank_query(ranked("q", {"n"}), pred("q", "L", 1), idx);
  CHECK(ids_of(out) == std::vector<std::string>{"b", "a", "c", "n"});
  RerankOptions cap2;
  cap2.cap = 2;
  CHECK(ids_of(rerank_query(ranked("q", {"n"}), pred("q", "L", 1), idx, cap2)) ==
        std::vector<std::string>{"b", "a"});
}

TEST_CASE("rerank_query: min confidence turns weak positives into negatives") {
  PredictionMap idx = index_predictions({pred("weak", "L", 0.1), pred("strong", "L", 2.0)});
  RerankOptions opts;
  opts.min_confidence = 1.0;
  const auto out = rerank_query(ranked("q", {"weak", "strong"}), pred("q", "L", 1), idx, opts);
  CHECK(ids_of(out) == std::vector<std::string>{"strong", "weak"});
}

TEST_CASE("rerank_batch") {
  PredictionMap idx = index_predictions({pred("i", "L", 1)});
  PredictionMap test = index_predictions({pred("q", "L", 1)});
  CHECK(rerank_batch({}, test, idx).empty());
  const auto one = rerank_batch({ranked("q", {"i"})}, test, idx);
  CHECK(one.size() == 1);
  CHECK(one[0] == rerank_query(ranked("q", {"i"}), pred("q", "L", 1), idx));
  try {
    rerank_batch({ranked("q", {"i"}), ranked("ghost", {"i"})}, test, idx);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
  CHECK_THROWS_AS(index_predictions({pred("a", "L", 1), pred("a", "L", 2)}), Error);
}

TEST_CASE("map@k: hand-computed values") {
  RelevanceTable t;
  t.add("q", {"a", "b"});
  CHECK(std::abs(map_at_k({ranked("q", {"a", "x", "b"})}, t, 100).value - (1.0 + 2.0 / 3.0) / 2.0) <= 1e-9);
  CHECK(map_at_k({ranked("q", {"a", "b", "x"})}, t, 100).value == 1.0);

  // min(m, k) normalisation: 3 relevant, k=2, both slots hit.
  RelevanceTable t3;
  t3.add("q", {"a", "b", "c"});
  CHECK(map_at_k({ranked("q", {"a", "b", "c"})}, t3, 2).value == 1.0);
  CHECK(std::abs(map_at_k({ranked("q", {"x", "a", "b"})}, t3, 2).value - 0.25) <= 1e-9);

  // m = 0 queries are excluded from the mean.
  RelevanceTable t0;
  t0.add("q", {"a"});
  t0.add("empty", {});
  const auto r = map_at_k({ranked("q", {"a"}), ranked("empty", {"a"})}, t0, 100);
  CHECK(r.value == 1.0);
  CHECK(r.breakdown.size() == 1);

  // A duplicate keeps its rank slot but scores once.
  CHECK(std::abs(map_at_k({ranked("q", {"a", "a", "b"})}, t, 100).value - (1.0 + 2.0 / 3.0) / 2.0) <= 1e-9);
  CHECK_THROWS_AS(map_at_k({ranked("stranger", {"a"})}, t, 100), Error);
}

TEST_CASE("mean_ap: hand-computed values and ignore sets") {
  RelevanceTable t;
  t.add("q", {"a", "b"});
  CHECK(std::abs(mean_ap({ranked("q", {"x", "a", "y", "b"})}, t).value - 0.5) <= 1e-9);
  CHECK(mean_ap({ranked("q", {"a", "b", "y"})}, t).value == 1.0);

  RelevanceTable ig;
  ig.add("q", {"a"}, {"junk"});
  CHECK(mean_ap({ranked("q", {"junk", "a"})}, ig).value == 1.0);
  CHECK_THROWS_AS(ig.add("r", {"a"}, {"a"}), Error);
}

TEST_CASE("gap: hand-computed values") {
  RecognitionTruth one;
  one.add("t", "5");
  CHECK(gap({pred("t", "5", -3.0)}, one).value == 1.0);

  RecognitionTruth two;
  two.add("t1", "A");
  two.add("t2", "B");
  CHECK(std::abs(gap({pred("t1", "A", 0.9), pred("t2", "C", 0.95)}, two).value - 0.25) <= 1e-9);

  RecognitionTruth with_distractor;
  with_distractor.add("t", "A");
  with_distractor.add("d", std::nullopt);
  CHECK(std::abs(gap({pred("t", "A", 0.9), pred("d", "A", 0.95)}, with_distractor).value - 0.5) <= 1e-9);
  CHECK(gap({pred("t", "A", 0.9), pred("d", "A", -2.0)}, with_distractor).value == 1.0);

  // Unpredicted labeled queries still count in the denominator.
  CHECK(std::abs(gap({pred("t1", "A", 1.0)}, two).value - 0.5) <= 1e-9);

  CHECK_THROWS_AS(gap({pred("t1", "A", 1), pred("t1", "A", 2)}, two), Error);
  CHECK_THROWS_AS(gap({pred("zzz", "A", 1)}, two), Error);
}

TEST_CASE("gap: ties break by ascending test id") {
  RecognitionTruth t;
  t.add("a", "X");
  t.add("b", "Y");
  // Equal confidence: "a" (wrong) sorts first.
  CHECK(std::abs(gap({pred("b", "Y", 1.0), pred("a", "Z", 1.0)}, t).value - 0.25) <= 1e-9);
}

TEST_CASE("gap is invariant under strictly increasing rescaling of confidences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int inst = 0; inst < 100; ++inst) {
    RecognitionTruth truth;
    std::vector<Prediction> preds, scaled;
    for (int i = 0; i < 20; ++i) {
      const std::string id = "t" + std::to_string(i);
      truth.add(id, i % 5 == 0 ? std::nullopt : std::optional<std::string>(std::to_string(lab(rng))));
      const double c = u(rng);
      preds.push_back(pred(id, std::to_string(lab(rng)), c));
      scaled.push_back(pred(id, preds.back().label, 3.0 * c + 7.0));
    }
    CHECK(gap(preds, truth).value == gap(scaled, truth).value);
  }
}
