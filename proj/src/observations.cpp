#include "l20mc/observations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace l20mc {

ObservationSet::ObservationSet(Index n_rows, Index n_cols, std::vector<Entry> entries)
    : n_rows_(n_rows), n_cols_(n_cols), entries_(std::move(entries)) {
  if (n_rows_ <= 0 || n_cols_ <= 0) throw validation_error("observation set: dimensions must be positive");
  if (entries_.empty()) throw validation_error("observation set: at least one entry required");
  double sq = 0.0;
  for (const Entry& e : entries_) {
    if (e.row < 0 || e.row >= n_rows_ || e.col < 0 || e.col >= n_cols_)
      throw validation_error("observation set: index out of range");
    if (!std::isfinite(e.value)) throw validation_error("observation set: non-finite value");
    sq += e.value * e.value;
  }
  fro_norm_ = std::sqrt(sq);
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t t = 1; t < entries_.size(); ++t) {
    if (entries_[t].row == entries_[t - 1].row && entries_[t].col == entries_[t - 1].col)
      throw validation_error("observation set: duplicate index pair");
  }
  row_ptr_.assign(static_cast<std::size_t>(n_rows_) + 1, 0);
  for (const Entry& e : entries_) ++row_ptr_[static_cast<std::size_t>(e.row) + 1];
  for (Index i = 0; i < n_rows_; ++i) row_ptr_[i + 1] += row_ptr_[i];

  col_order_.resize(entries_.size());
  std::iota(col_order_.begin(), col_order_.end(), Index{0});
  std::sort(col_order_.begin(), col_order_.end(), [this](Index a, Index b) {
    const Entry& ea = entries_[a];
    const Entry& eb = entries_[b];
    return ea.col != eb.col ? ea.col < eb.col : ea.row < eb.row;
  });
  col_ptr_.assign(static_cast<std::size_t>(n_cols_) + 1, 0);
  for (const Entry& e : entries_) ++col_ptr_[static_cast<std::size_t>(e.col) + 1];
  for (Index j = 0; j < n_cols_; ++j) col_ptr_[j + 1] += col_ptr_[j];
}

double ObservationSet::spectral_norm() const {
  std::call_once(spec_cache_->once, [this]() {
    Vec x = Vec::Zero(n_cols_);
    // deterministic start: column sums of |M|, falling back to uniform
    for (const Entry& e : entries_) x[e.col] += std::abs(e.value);
    if (x.norm() == 0.0) x.setOnes();
    x /= x.norm();
    Vec y(n_rows_);
    double sigma = 0.0;
    for (int it = 0; it < 500; ++it) {
      y.setZero();
      for (const Entry& e : entries_) y[e.row] += e.value * x[e.col];
      const double est = y.norm();  // = ||A x|| for unit x
      if (est == 0.0) {
        sigma = 0.0;
        break;
      }
      x.setZero();
      for (const Entry& e : entries_) x[e.col] += e.value * y[e.row];
      x /= x.norm();
      if (it > 2 && std::abs(est - sigma) <= 1e-8 * est) {
        sigma = est;
        break;
      }
      sigma = est;
    }
    spec_cache_->value = sigma;
  });
  return spec_cache_->value;
}

namespace {
void check_factor_dims(const ObservationSet& obs, const Mat& u, const Mat& v) {
  if (u.cols() != v.cols()) throw dimension_error("factor matrices must have equal column counts");
  if (u.rows() != obs.rows() || v.rows() != obs.cols())
    throw dimension_error("factor dimensions do not match the observation set");
}
}  // namespace

void product_on_omega(const ObservationSet& obs, const Mat& u, const Mat& v,
                      std::span<double> out) {
  check_factor_dims(obs, u, v);
  const auto& entries = obs.entries();
  const auto& row_ptr = obs.row_ptr();
  const Index n = obs.rows();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    for (Index t = row_ptr[i]; t < row_ptr[i + 1]; ++t) {
      out[static_cast<std::size_t>(t)] = u.row(i).dot(v.row(entries[t].col));
    }
  }
}

void residual_into(const ObservationSet& obs, const Mat& u, const Mat& v,
                   std::span<double> out) {
  product_on_omega(obs, u, v, out);
  const auto& entries = obs.entries();
  for (std::size_t t = 0; t < entries.size(); ++t) out[t] -= entries[t].value;
}

SparseResidual residual(const ObservationSet& obs, const Mat& u, const Mat& v) {
  SparseResidual res;
  res.obs = &obs;
  res.values.resize(static_cast<std::size_t>(obs.nnz()));
  residual_into(obs, u, v, res.values);
  return res;
}

double loss_from_residual(const SparseResidual& res) {
  double sq = 0.0;
  for (double r : res.values) sq += r * r;
  return 0.5 * sq;
}

double loss_value(const ObservationSet& obs, const Mat& u, const Mat& v) {
  check_factor_dims(obs, u, v);
  const auto& entries = obs.entries();
  const auto& row_ptr = obs.row_ptr();
  const Index n = obs.rows();
  double sq = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : sq)
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Index t = row_ptr[i]; t < row_ptr[i + 1]; ++t) {
      const double r = u.row(i).dot(v.row(entries[t].col)) - entries[t].value;
      acc += r * r;
    }
    sq += acc;
  }
  return 0.5 * sq;
}

void grad_u_into(const SparseResidual& res, const Mat& v, Mat& out) {
  const ObservationSet& obs = *res.obs;
  if (v.rows() != obs.cols()) throw dimension_error("grad_u: V row count must equal n_cols");
  out.setZero(obs.rows(), v.cols());
  const auto& entries = obs.entries();
  const auto& row_ptr = obs.row_ptr();
  const Index n = obs.rows();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    for (Index t = row_ptr[i]; t < row_ptr[i + 1]; ++t) {
      out.row(i) += res.values[static_cast<std::size_t>(t)] * v.row(entries[t].col);
    }
  }
}

void grad_v_into(const SparseResidual& res, const Mat& u, Mat& out) {
  const ObservationSet& obs = *res.obs;
  if (u.rows() != obs.rows()) throw dimension_error("grad_v: U row count must equal n_rows");
  out.setZero(obs.cols(), u.cols());
  const auto& entries = obs.entries();
  const auto& col_order = obs.col_order();
  const auto& col_ptr = obs.col_ptr();
  const Index m = obs.cols();
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < m; ++j) {
    for (Index t = col_ptr[j]; t < col_ptr[j + 1]; ++t) {
      const Index pos = col_order[static_cast<std::size_t>(t)];
      out.row(j) += res.values[static_cast<std::size_t>(pos)] * u.row(entries[pos].row);
    }
  }
}

Mat grad_u(const SparseResidual& res, const Mat& v) {
  Mat out;
  grad_u_into(res, v, out);
  return out;
}

Mat grad_v(const SparseResidual& res, const Mat& u) {
  Mat out;
  grad_v_into(res, u, out);
  return out;
}

}  // namespace l20mc
