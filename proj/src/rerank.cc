#include "lmk/rerank.h"

#include <algorithm>
#include <unordered_set>

#include "lmk/util.h"

namespace lmk {

PredictionMap index_predictions(const std::vector<Prediction>& preds) {
  PredictionMap map;
  map.reserve(preds.size());
  for (const auto& p : preds) {
    if (!map.emplace(p.query_id, p).second) {
      throw Error(ErrorCode::kDuplicateId,
                  "duplicate prediction for " + p.query_id);
    }
  }
  return map;
}

namespace {

bool is_positive(const Prediction& entry_pred, const Prediction& query,
                 const RerankOptions& options) {
  if (entry_pred.label != query.label) return false;
  return !options.min_confidence ||
         entry_pred.confidence >= *options.min_confidence;
}

}  // namespace

Partition classify_entries(const RankedList& ranked, const Prediction& query,
                           const PredictionMap& index_preds,
                           const RerankOptions& options) {
  Partition part;
  for (const auto& e : ranked.entries) {
    auto it = index_preds.find(e.id);
    if (it == index_preds.end()) {
      throw Error(ErrorCode::kUnknownId,
                  "query " + ranked.query_id + ": no index prediction for " +
                      e.id);
    }
    (is_positive(it->second, query, options) ? part.positives : part.negatives)
        .push_back(e);
  }
  return part;
}

RankedList rerank_query(const RankedList& ranked, const Prediction& query,
                        const PredictionMap& index_preds,
                        const RerankOptions& options) {
  if (options.cap < 1) {
    throw Error(ErrorCode::kInvalidArgument, "rerank: cap must be >= 1");
  }
  Partition part = classify_entries(ranked, query, index_preds, options);

  std::unordered_set<std::string> present;
  for (const auto& e : ranked.entries) present.insert(e.id);
  std::vector<const Prediction*> missed;
  for (const auto& [id, pred] : index_preds) {
    if (!present.count(id) && is_positive(pred, query, options)) {
      missed.push_back(&pred);
    }
  }
  std::sort(missed.begin(), missed.end(),
            [](const Prediction* a, const Prediction* b) {
              if (a->confidence != b->confidence) {
                return a->confidence > b->confidence;
              }
              return a->query_id < b->query_id;
            });

  RankedList out;
  out.query_id = ranked.query_id;
  out.entries = std::move(part.positives);
  for (const Prediction* p : missed) {
    out.entries.push_back({p->query_id, p->confidence});
  }
  out.entries.insert(out.entries.end(), part.negatives.begin(),
                     part.negatives.end());
  if (out.entries.size() > options.cap) out.entries.resize(options.cap);
  return out;
}

std::vector<RankedList> rerank_batch(const std::vector<RankedList>& ranked,
                                     const PredictionMap& test_preds,
                                     const PredictionMap& index_preds,
                                     const RerankOptions& options,
                                     int threads) {
  std::vector<RankedList> out(ranked.size());
  std::vector<std::string> failures(ranked.size());
  parallel_for(ranked.size(), resolve_threads(threads), [&](std::size_t q) {
    try {
      auto it = test_preds.find(ranked[q].query_id);
      if (it == test_preds.end()) {
        throw Error(ErrorCode::kUnknownId, "no test prediction");
      }
      out[q] = rerank_query(ranked[q], it->second, index_preds, options);
    } catch (const Error& e) {
      failures[q] = ranked[q].query_id + ": " + e.what();
    }
  });
  std::string message;
  std::size_t failed = 0;
  for (const auto& f : failures) {
    if (f.empty()) continue;
    ++failed;
    message += "\n  " + f;
  }
  if (failed > 0) {
    throw Error(ErrorCode::kUnknownId,
                "rerank failed for " + std::to_string(failed) + " queries:" +
                    message);
  }
  return out;
}

}  // namespace lmk
