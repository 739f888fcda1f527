#include "l20mc/partial_svd.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>

#include "l20mc/rng.hpp"

namespace l20mc {

namespace {

// Y = A * G over the sparse support (A embedded n x m).
Mat apply_sparse(const ObservationSet& obs, const Mat& g) {
  Mat y = Mat::Zero(obs.rows(), g.cols());
  const auto& entries = obs.entries();
  const auto& row_ptr = obs.row_ptr();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < obs.rows(); ++i) {
    for (Index t = row_ptr[i]; t < row_ptr[i + 1]; ++t) {
      y.row(i) += entries[t].value * g.row(entries[t].col);
    }
  }
  return y;
}

Mat apply_sparse_t(const ObservationSet& obs, const Mat& g) {
  Mat y = Mat::Zero(obs.cols(), g.cols());
  const auto& entries = obs.entries();
  const auto& col_order = obs.col_order();
  const auto& col_ptr = obs.col_ptr();
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < obs.cols(); ++j) {
    for (Index t = col_ptr[j]; t < col_ptr[j + 1]; ++t) {
      const Index pos = col_order[static_cast<std::size_t>(t)];
      y.row(j) += entries[pos].value * g.row(entries[pos].row);
    }
  }
  return y;
}

Mat thin_q(const Mat& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), std::min(y.rows(), y.cols()));
  return q;
}

}  // namespace

PartialSvd partial_svd(const ObservationSet& obs, Index k, std::uint64_t seed,
                       int power_iters, Index oversample) {
  const Index n = obs.rows();
  const Index m = obs.cols();
  k = std::min(k, std::min(n, m));
  if (k <= 0) throw validation_error("partial_svd: k must be positive");
  const Index ell = std::min(k + std::max<Index>(oversample, 0), std::min(n, m));

  Rng rng(seed, RngStream::kInit);
  Mat g(m, ell);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < ell; ++j) g(i, j) = rng.normal();

  Mat q = thin_q(apply_sparse(obs, g));
  for (int it = 0; it < power_iters; ++it) {
    Mat z = thin_q(apply_sparse_t(obs, q));
    q = thin_q(apply_sparse(obs, z));
  }

  // B = Q^T A computed as (A^T Q)^T, ell x m
  Mat atq = apply_sparse_t(obs, q);
  Eigen::MatrixXd b = atq.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);

  PartialSvd out;
  out.left = q * svd.matrixU().leftCols(k);
  out.right = svd.matrixV().leftCols(k);
  out.sigma = svd.singularValues().head(k);

  // sign convention: first nonzero entry of each left vector nonnegative
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < out.left.rows(); ++i) {
      if (out.left(i, j) != 0.0) {
        if (out.left(i, j) < 0.0) {
          out.left.col(j) = -out.left.col(j);
          out.right.col(j) = -out.right.col(j);
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace l20mc
