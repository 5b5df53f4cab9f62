#include "lmk/knn.h"

#include <algorithm>

#include "lmk/util.h"

namespace lmk {

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
    sum += diff * diff;
  }
  return sum;
}

NeighborList knn_search_row(std::span<const float> query,
                            const std::string& query_id,
                            const DescriptorMatrix& db, std::size_t k,
                            bool exclude_self) {
  NeighborList out;
  out.query_id = query_id;
  struct Candidate {
    double distance;
    std::size_t index;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(db.rows());
  for (std::size_t i = 0; i < db.rows(); ++i) {
    if (exclude_self && db.id(i) == query_id) continue;
    candidates.push_back({squared_distance(query, db.row(i)), i});
  }
  // Ids are unique, so (distance, id) is a strict total order and the
  // selected prefix is independent of storage order.
  auto closer = [&db](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return db.id(a.index) < db.id(b.index);
  };
  const std::size_t take = std::min(k, candidates.size());
  if (take < candidates.size()) {
    std::nth_element(candidates.begin(), candidates.begin() + take,
                     candidates.end(), closer);
    candidates.resize(take);
  }
  std::sort(candidates.begin(), candidates.end(), closer);
  out.neighbors.reserve(take);
  for (const auto& c : candidates) {
    out.neighbors.push_back({c.index, db.id(c.index), c.distance});
  }
  return out;
}

std::vector<NeighborList> knn_search(const DescriptorMatrix& queries,
                                     const DescriptorMatrix& db, std::size_t k,
                                     const SearchOptions& options) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "knn: k must be >= 1");
  if (queries.dim() != db.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "knn: query dim " + std::to_string(queries.dim()) +
                    " != database dim " + std::to_string(db.dim()));
  }
  if (!queries.normalized() || !db.normalized()) {
    warn("knn: inputs are not marked L2-normalized; distances are still exact "
         "but cosine scores are not meaningful");
  }
  std::vector<NeighborList> results(queries.rows());
  parallel_for(queries.rows(), resolve_threads(options.threads),
               [&](std::size_t q) {
                 results[q] = knn_search_row(queries.row(q), queries.id(q), db,
                                             k, options.exclude_self);
               });
  return results;
}

RankedList to_ranked_list(const NeighborList& list) {
  RankedList out;
  out.query_id = list.query_id;
  out.entries.reserve(list.neighbors.size());
  for (const auto& n : list.neighbors) {
    out.entries.push_back({n.id, 1.0 - n.distance / 2.0});
  }
  return out;
}

}  // namespace lmk
