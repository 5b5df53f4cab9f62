#include "lmk/vector_ops.h"

#include <cmath>

#include "lmk/knn.h"
#include "lmk/util.h"

namespace lmk {
namespace {

// Normalizes an f64 accumulator into f32 output; returns false for zero rows.
bool write_normalized(const std::vector<double>& acc, float* out) {
  double sum = 0.0;
  for (double v : acc) sum += v * v;
  const double norm = std::sqrt(sum);
  if (norm == 0.0) {
    for (std::size_t d = 0; d < acc.size(); ++d) out[d] = 0.f;
    return false;
  }
  for (std::size_t d = 0; d < acc.size(); ++d) {
    out[d] = static_cast<float>(acc[d] / norm);
  }
  return true;
}

DescriptorMatrix finish(const std::vector<std::string>& ids, std::size_t dim,
                        std::vector<float> data) {
  DescriptorMatrix out(ids, dim, std::move(data));
  out.mark_normalized();
  return out;
}

void check_aligned(const std::vector<DescriptorMatrix>& inputs,
                   bool require_same_dim, const char* op) {
  const auto& first = inputs.front();
  for (std::size_t m = 1; m < inputs.size(); ++m) {
    if (inputs[m].ids() != first.ids()) {
      throw Error(ErrorCode::kIdCountMismatch,
                  std::string(op) + ": input " + std::to_string(m) +
                      " ids differ from input 0");
    }
    if (require_same_dim && inputs[m].dim() != first.dim()) {
      throw Error(ErrorCode::kDimMismatch,
                  std::string(op) + ": input " + std::to_string(m) +
                      " dim differs from input 0");
    }
  }
}

}  // namespace

NormalizeResult l2_normalize(const DescriptorMatrix& m) {
  std::vector<float> data(m.data().size());
  std::vector<std::string> zero_rows;
  std::vector<double> acc(m.dim());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    for (std::size_t d = 0; d < m.dim(); ++d) acc[d] = row[d];
    if (!write_normalized(acc, data.data() + i * m.dim())) {
      zero_rows.push_back(m.id(i));
    }
  }
  return {finish(m.ids(), m.dim(), std::move(data)), std::move(zero_rows)};
}

DescriptorMatrix multiscale_average(
    const std::vector<DescriptorMatrix>& per_scale) {
  if (per_scale.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "multiscale_average: no inputs");
  }
  check_aligned(per_scale, true, "multiscale_average");
  const auto& first = per_scale.front();
  const std::size_t dim = first.dim();
  std::vector<float> data(first.data().size());
  std::vector<double> acc(dim);
  for (std::size_t i = 0; i < first.rows(); ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& m : per_scale) {
      auto row = m.row(i);
      for (std::size_t d = 0; d < dim; ++d) acc[d] += row[d];
    }
    for (double& v : acc) v /= static_cast<double>(per_scale.size());
    write_normalized(acc, data.data() + i * dim);
  }
  return finish(first.ids(), dim, std::move(data));
}

DescriptorMatrix concat_ensemble(const std::vector<DescriptorMatrix>& models) {
  if (models.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "concat_ensemble: no models");
  }
  check_aligned(models, false, "concat_ensemble");
  std::size_t dim = 0;
  for (const auto& m : models) dim += m.dim();
  const std::size_t rows = models.front().rows();
  std::vector<float> data(rows * dim);
  std::vector<double> acc(dim);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t offset = 0;
    for (const auto& m : models) {
      auto row = m.row(i);
      for (std::size_t d = 0; d < m.dim(); ++d) acc[offset + d] = row[d];
      offset += m.dim();
    }
    write_normalized(acc, data.data() + i * dim);
  }
  return finish(models.front().ids(), dim, std::move(data));
}

DescriptorMatrix dba(const DescriptorMatrix& db, std::size_t k, int threads) {
  if (k == 0) return db;
  if (k >= db.rows()) {
    throw Error(ErrorCode::kInvalidArgument,
                "dba: k=" + std::to_string(k) + " must be < database size " +
                    std::to_string(db.rows()));
  }
  const std::size_t dim = db.dim();
  std::vector<float> data(db.data().size());
  parallel_for(db.rows(), resolve_threads(threads), [&](std::size_t i) {
    const auto neighbors =
        knn_search_row(db.row(i), db.id(i), db, k, /*exclude_self=*/true);
    std::vector<double> acc(dim);
    auto self = db.row(i);
    for (std::size_t d = 0; d < dim; ++d) acc[d] = self[d];
    for (const auto& n : neighbors.neighbors) {
      auto row = db.row(n.index);
      for (std::size_t d = 0; d < dim; ++d) acc[d] += row[d];
    }
    const double count = static_cast<double>(neighbors.neighbors.size() + 1);
    for (double& v : acc) v /= count;
    write_normalized(acc, data.data() + i * dim);
  });
  return finish(db.ids(), dim, std::move(data));
}

DescriptorMatrix alpha_qe(const DescriptorMatrix& queries,
                          const DescriptorMatrix& db, std::size_t k,
                          double alpha, int threads) {
  if (alpha < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "alpha_qe: alpha must be >= 0");
  }
  if (k == 0) return queries;
  if (k > db.rows()) {
    throw Error(ErrorCode::kInvalidArgument,
                "alpha_qe: k=" + std::to_string(k) + " exceeds database size " +
                    std::to_string(db.rows()));
  }
  if (queries.dim() != db.dim()) {
    throw Error(ErrorCode::kDimMismatch, "alpha_qe: dim mismatch");
  }
  const std::size_t dim = db.dim();
  std::vector<float> data(queries.data().size());
  parallel_for(queries.rows(), resolve_threads(threads), [&](std::size_t q) {
    const auto neighbors =
        knn_search_row(queries.row(q), queries.id(q), db, k, false);
    std::vector<double> acc(dim);
    auto self = queries.row(q);
    for (std::size_t d = 0; d < dim; ++d) acc[d] = self[d];
    for (const auto& n : neighbors.neighbors) {
      const double cosine = 1.0 - n.distance / 2.0;
      const double weight = std::pow(std::max(cosine, 0.0), alpha);
      auto row = db.row(n.index);
      for (std::size_t d = 0; d < dim; ++d) acc[d] += weight * row[d];
    }
    write_normalized(acc, data.data() + q * dim);
  });
  return finish(queries.ids(), dim, std::move(data));
}

}  // namespace lmk
