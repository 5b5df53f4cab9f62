#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmk/dataset.h"

namespace lmk {

using PredictionMap = std::unordered_map<std::string, Prediction>;

PredictionMap index_predictions(const std::vector<Prediction>& preds);

struct RerankOptions {
  std::size_t cap = 100;
  // When set, an entry is positive only if its own prediction confidence is
  // at least this value. Off by default: positivity is pure label agreement.
  std::optional<double> min_confidence;
};

struct Partition {
  std::vector<RankedEntry> positives;
  std::vector<RankedEntry> negatives;
};

// Splits a retrieved list by whether each index image's predicted label
// equals the query's predicted label. Relative order is kept in both parts.
Partition classify_entries(const RankedList& ranked, const Prediction& query,
                           const PredictionMap& index_preds,
                           const RerankOptions& options = {});

// positives ++ missed positives (confidence desc, id asc) ++ negatives,
// truncated to options.cap.
RankedList rerank_query(const RankedList& ranked, const Prediction& query,
                        const PredictionMap& index_preds,
                        const RerankOptions& options = {});

// rerank_query per list; test predictions are looked up by query id.
// Failures for individual queries are collected and reported together.
std::vector<RankedList> rerank_batch(const std::vector<RankedList>& ranked,
                                     const PredictionMap& test_preds,
                                     const PredictionMap& index_preds,
                                     const RerankOptions& options = {},
                                     int threads = 1);

}  // namespace lmk
