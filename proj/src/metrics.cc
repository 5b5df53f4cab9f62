#include "lmk/metrics.h"

#include <algorithm>

#include "lmk/util.h"

namespace lmk {

void RelevanceTable::add(std::string query_id,
                         std::vector<std::string> relevant,
                         std::vector<std::string> ignore) {
  if (query_id.empty()) {
    throw Error(ErrorCode::kEmptyId, "relevance: empty query id");
  }
  if (table_.count(query_id)) {
    throw Error(ErrorCode::kDuplicateId, "relevance: duplicate query " + query_id);
  }
  QueryRelevance q;
  q.relevant.insert(relevant.begin(), relevant.end());
  q.ignore.insert(ignore.begin(), ignore.end());
  for (const auto& id : q.ignore) {
    if (q.relevant.count(id)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "relevance: " + id + " is both relevant and ignored for " +
                      query_id);
    }
  }
  order_.push_back(query_id);
  table_.emplace(std::move(query_id), std::move(q));
}

const QueryRelevance* RelevanceTable::find(const std::string& query_id) const {
  auto it = table_.find(query_id);
  return it == table_.end() ? nullptr : &it->second;
}

void RecognitionTruth::add(std::string test_id,
                           std::optional<std::string> label) {
  if (test_id.empty()) throw Error(ErrorCode::kEmptyId, "truth: empty test id");
  if (table_.count(test_id)) {
    throw Error(ErrorCode::kDuplicateId, "truth: duplicate test id " + test_id);
  }
  if (label) ++labeled_;
  order_.push_back(test_id);
  table_.emplace(std::move(test_id), std::move(label));
}

const std::optional<std::string>* RecognitionTruth::find(
    const std::string& test_id) const {
  auto it = table_.find(test_id);
  return it == table_.end() ? nullptr : &it->second;
}

namespace {

// Sum of P(i) over relevant ranks within the first `limit` (ignored entries
// removed first) divided by `normalizer`.
double average_precision(const RankedList& list, const QueryRelevance& rel,
                         std::size_t limit, double normalizer) {
  std::unordered_set<std::string> seen;
  std::size_t rank = 0;
  std::size_t hits = 0;
  double sum = 0.0;
  for (const auto& e : list.entries) {
    if (rel.ignore.count(e.id)) continue;
    if (rank == limit) break;
    ++rank;
    if (rel.relevant.count(e.id) && seen.insert(e.id).second) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  return sum / normalizer;
}

template <typename Normalizer>
MetricReport mean_over_queries(const std::vector<RankedList>& ranked,
                               const RelevanceTable& truth, std::size_t limit,
                               Normalizer normalizer) {
  MetricReport report;
  double total = 0.0;
  for (const auto& list : ranked) {
    const QueryRelevance* rel = truth.find(list.query_id);
    if (rel == nullptr) {
      throw Error(ErrorCode::kUnknownId,
                  "query " + list.query_id + " has no ground truth");
    }
    if (rel->relevant.empty()) continue;
    const double ap =
        average_precision(list, *rel, limit, normalizer(rel->relevant.size()));
    report.breakdown.emplace_back(list.query_id, ap);
    total += ap;
  }
  if (!report.breakdown.empty()) {
    report.value = total / static_cast<double>(report.breakdown.size());
  }
  return report;
}

}  // namespace

MetricReport map_at_k(const std::vector<RankedList>& ranked,
                      const RelevanceTable& truth, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "map@k: k must be >= 1");
  return mean_over_queries(ranked, truth, k, [k](std::size_t m) {
    return static_cast<double>(std::min(m, k));
  });
}

MetricReport mean_ap(const std::vector<RankedList>& ranked,
                     const RelevanceTable& truth) {
  return mean_over_queries(ranked, truth, SIZE_MAX, [](std::size_t m) {
    return static_cast<double>(m);
  });
}

MetricReport gap(const std::vector<Prediction>& preds,
                 const RecognitionTruth& truth) {
  std::unordered_set<std::string> seen;
  std::vector<const Prediction*> order;
  order.reserve(preds.size());
  for (const auto& p : preds) {
    if (!seen.insert(p.query_id).second) {
      throw Error(ErrorCode::kDuplicateId,
                  "gap: duplicate prediction for " + p.query_id);
    }
    if (truth.find(p.query_id) == nullptr) {
      throw Error(ErrorCode::kUnknownId,
                  "gap: prediction for unknown test id " + p.query_id);
    }
    order.push_back(&p);
  }
  std::sort(order.begin(), order.end(),
            [](const Prediction* a, const Prediction* b) {
              if (a->confidence != b->confidence) {
                return a->confidence > b->confidence;
              }
              return a->query_id < b->query_id;
            });
  MetricReport report;
  std::size_t correct = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& label = *truth.find(order[i]->query_id);
    double contribution = 0.0;
    if (label && *label == order[i]->label) {
      ++correct;
      contribution = static_cast<double>(correct) / static_cast<double>(i + 1);
    }
    sum += contribution;
    report.breakdown.emplace_back(order[i]->query_id, contribution);
  }
  if (truth.labeled_count() > 0) {
    report.value = sum / static_cast<double>(truth.labeled_count());
  }
  return report;
}

}  // namespace lmk
