#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "l20mc/common.hpp"

namespace l20mc {

struct Entry {
  Index row;
  Index col;
  double value;
};

class ObservationSet;

// Residual values R_ij = (U V^T)_ij - M_ij on the observed support, stored
// in the owner's row-sorted entry order.
struct SparseResidual {
  const ObservationSet* obs = nullptr;
  std::vector<double> values;
};

// The observed entries of the matrix-completion problem: the index set, the
// observed values, and the dimensions. Immutable after construction; all
// operations over the support stream through the row-sorted entries or the
// auxiliary column-sorted view.
class ObservationSet {
 public:
  // Entries are validated (in-range, finite, no duplicates), then sorted by
  // (row, col). Throws validation_error on bad input.
  ObservationSet(Index n_rows, Index n_cols, std::vector<Entry> entries);

  Index rows() const { return n_rows_; }
  Index cols() const { return n_cols_; }
  Index nnz() const { return static_cast<Index>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }

  // CSR-style boundaries into entries() (size rows()+1).
  const std::vector<Index>& row_ptr() const { return row_ptr_; }
  // Permutation of entry positions sorted by (col, row) and its boundaries.
  const std::vector<Index>& col_order() const { return col_order_; }
  const std::vector<Index>& col_ptr() const { return col_ptr_; }

  // Frobenius norm of the observed values, ||M_Omega||_F.
  double fro_norm() const { return fro_norm_; }
  // Spectral norm of M_Omega embedded in n x m, by power iteration
  // (deterministic start, relative tolerance 1e-8). Cached.
  double spectral_norm() const;
  double sample_ratio() const {
    return static_cast<double>(nnz()) / (static_cast<double>(n_rows_) * static_cast<double>(n_cols_));
  }

 private:
  Index n_rows_;
  Index n_cols_;
  std::vector<Entry> entries_;
  std::vector<Index> row_ptr_;
  std::vector<Index> col_order_;
  std::vector<Index> col_ptr_;
  double fro_norm_ = 0.0;
  struct SpecCache {
    std::once_flag once;
    double value = -1.0;
  };
  std::unique_ptr<SpecCache> spec_cache_ = std::make_unique<SpecCache>();
};

// f(U V^T) = 1/2 sum_{(i,j) in Omega} ((U V^T)_ij - M_ij)^2, entrywise over
// the support.
double loss_value(const ObservationSet& obs, const Mat& u, const Mat& v);

SparseResidual residual(const ObservationSet& obs, const Mat& u, const Mat& v);

// Allocation-free variants used inside the solvers. `out` must have size
// obs.nnz().
void residual_into(const ObservationSet& obs, const Mat& u, const Mat& v,
                   std::span<double> out);
// (U V^T)_ij on the support, without subtracting M.
void product_on_omega(const ObservationSet& obs, const Mat& u, const Mat& v,
                      std::span<double> out);

double loss_from_residual(const SparseResidual& res);

// grad_U = R V and grad_V = R^T U for the sparse residual R.
Mat grad_u(const SparseResidual& res, const Mat& v);
Mat grad_v(const SparseResidual& res, const Mat& u);
void grad_u_into(const SparseResidual& res, const Mat& v, Mat& out);
void grad_v_into(const SparseResidual& res, const Mat& u, Mat& out);

// Lipschitz modulus of the gradient of f: X -> (X - M) restricted to Omega.
constexpr double lipschitz_f() { return 1.0; }

}  // namespace l20mc
