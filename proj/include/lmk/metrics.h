#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lmk/dataset.h"

namespace lmk {

struct QueryRelevance {
  std::unordered_set<std::string> relevant;
  std::unordered_set<std::string> ignore;
};

// Per query: relevant index ids and ids to drop from the ranking before
// scoring. relevant and ignore must be disjoint.
class RelevanceTable {
 public:
  void add(std::string query_id, std::vector<std::string> relevant,
           std::vector<std::string> ignore = {});
  const QueryRelevance* find(const std::string& query_id) const;
  const std::vector<std::string>& query_ids() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::unordered_map<std::string, QueryRelevance> table_;
  std::vector<std::string> order_;
};

// test id -> true label, or nullopt for a non-landmark (distractor) query.
class RecognitionTruth {
 public:
  void add(std::string test_id, std::optional<std::string> label);
  const std::optional<std::string>* find(const std::string& test_id) const;
  std::size_t size() const { return order_.size(); }
  std::size_t labeled_count() const { return labeled_; }
  const std::vector<std::string>& test_ids() const { return order_; }

 private:
  std::unordered_map<std::string, std::optional<std::string>> table_;
  std::vector<std::string> order_;
  std::size_t labeled_ = 0;
};

struct MetricReport {
  double value = 0.0;
  // Per scored query (AP) in input order; for GAP, per prediction in sorted
  // order with its contribution P(i) * rel(i).
  std::vector<std::pair<std::string, double>> breakdown;
};

// mAP@k with min(m, k) normalization. A repeated id keeps its rank slot but
// only counts once. Queries without relevant items are skipped.
MetricReport map_at_k(const std::vector<RankedList>& ranked,
                      const RelevanceTable& truth, std::size_t k);

// Full-list mAP after removing ignore-set entries.
MetricReport mean_ap(const std::vector<RankedList>& ranked,
                     const RelevanceTable& truth);

// Global average precision over predictions pooled across queries, sorted by
// confidence descending with ties by ascending test id. Normalized by the
// number of labeled queries in the truth.
MetricReport gap(const std::vector<Prediction>& preds,
                 const RecognitionTruth& truth);

}  // namespace lmk
