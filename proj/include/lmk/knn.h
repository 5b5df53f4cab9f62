#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lmk/dataset.h"

namespace lmk {

struct Neighbor {
  std::size_t index = 0;  // row in the database matrix
  std::string id;
  double distance = 0.0;  // squared euclidean

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Distances non-decreasing, ties by ascending id, at most k entries.
struct NeighborList {
  std::string query_id;
  std::vector<Neighbor> neighbors;

  friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

struct SearchOptions {
  bool exclude_self = false;  // skip a db row whose id equals the query id
  int threads = 1;
};

// Squared euclidean distance accumulated in f64.
double squared_distance(std::span<const float> a, std::span<const float> b);

// Exact k-nearest-neighbor search. Returns one list per query row, in query
// order. k larger than the candidate pool yields every candidate.
std::vector<NeighborList> knn_search(const DescriptorMatrix& queries,
                                     const DescriptorMatrix& db, std::size_t k,
                                     const SearchOptions& options = {});

// Single-row variant used by the batch search and by per-query callers.
NeighborList knn_search_row(std::span<const float> query,
                            const std::string& query_id,
                            const DescriptorMatrix& db, std::size_t k,
                            bool exclude_self);

// score = 1 - d^2 / 2, the cosine similarity for unit-norm rows.
RankedList to_ranked_list(const NeighborList& list);

}  // namespace lmk
