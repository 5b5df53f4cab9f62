#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lmk/dataset.h"

namespace lmk {

struct NormalizeResult {
  DescriptorMatrix matrix;
  std::vector<std::string> zero_rows;  // ids of rows left at zero
};

// Every nonzero row scaled to unit L2 norm; zero rows are kept and reported.
NormalizeResult l2_normalize(const DescriptorMatrix& m);

struct MultiscaleConfig {
  std::vector<double> scales{0.75, 1.0, 1.25};
};

// Row-wise mean over per-scale descriptors, re-normalized. All inputs must
// share ids (same order) and dim.
DescriptorMatrix multiscale_average(const std::vector<DescriptorMatrix>& per_scale);

// Per-id concatenation in model order, re-normalized. Output dim is the sum
// of input dims (6 x 512 -> 3072).
DescriptorMatrix concat_ensemble(const std::vector<DescriptorMatrix>& models);

struct AugmentConfig {
  std::size_t dba_k = 10;
  std::size_t qe_k = 10;
  double qe_alpha = 3.0;
};

// Database-side augmentation: each row becomes the uniform mean of itself and
// its k nearest other rows (computed on the original matrix), re-normalized.
DescriptorMatrix dba(const DescriptorMatrix& db, std::size_t k, int threads = 1);

// alpha query expansion: q' = q + sum_j max(cos_j, 0)^alpha * x_j over the top-k
// database neighbors, re-normalized.
DescriptorMatrix alpha_qe(const DescriptorMatrix& queries,
                          const DescriptorMatrix& db, std::size_t k,
                          double alpha, int threads = 1);

}  // namespace lmk
