#include "l20mc/factors.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace l20mc {

std::vector<Index> nonzero_columns(const Mat& m) {
  std::vector<Index> idx;
  for (Index j = 0; j < m.cols(); ++j) {
    bool nonzero = false;
    for (Index i = 0; i < m.rows(); ++i) {
      if (m(i, j) != 0.0) {
        nonzero = true;
        break;
      }
    }
    if (nonzero) idx.push_back(j);
  }
  return idx;
}

Index count_nonzero_columns(const Mat& m) {
  Index c = 0;
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (m(i, j) != 0.0) {
        ++c;
        break;
      }
    }
  }
  return c;
}

double eval_phi(const ObservationSet& obs, const FactorPair& fp, const RegWeights& w) {
  fp.require_consistent();
  w.validate();
  double val = loss_value(obs, fp.u, fp.v);
  val += 0.5 * w.mu * (fp.u.squaredNorm() + fp.v.squaredNorm());
  if (w.lambda > 0.0)
    val += w.lambda * static_cast<double>(count_nonzero_columns(fp.u) + count_nonzero_columns(fp.v));
  return val;
}

double eval_f_mu(const ObservationSet& obs, const FactorPair& fp, double mu) {
  RegWeights w{0.0, mu};
  return eval_phi(obs, fp, w);
}

Index numerical_rank(const FactorPair& fp, double rel_tol) {
  fp.require_consistent();
  if (rel_tol <= 0.0 || rel_tol >= 1.0) throw validation_error("numerical_rank: rel_tol must lie in (0,1)");
  const Index r = fp.u.cols();
  if (r == 0) return 0;
  Eigen::MatrixXd ru = Eigen::HouseholderQR<Eigen::MatrixXd>(fp.u)
                           .matrixQR()
                           .topRows(std::min(fp.u.rows(), r))
                           .triangularView<Eigen::Upper>();
  Eigen::MatrixXd rv = Eigen::MatrixXd(Eigen::HouseholderQR<Eigen::MatrixXd>(fp.v)
                                           .matrixQR()
                                           .topRows(std::min(fp.v.rows(), r))
                                           .triangularView<Eigen::Upper>());
  Eigen::MatrixXd core = ru * rv.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(core);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++rank;
  return rank;
}

double balance_residual(const FactorPair& fp) {
  fp.require_consistent();
  Eigen::MatrixXd gu = fp.u.transpose() * fp.u;
  Eigen::MatrixXd gv = fp.v.transpose() * fp.v;
  return (gu - gv).norm();
}

double product_fro_sq(const FactorPair& fp) {
  fp.require_consistent();
  Eigen::MatrixXd gu = fp.u.transpose() * fp.u;
  Eigen::MatrixXd gv = fp.v.transpose() * fp.v;
  return (gu.cwiseProduct(gv)).sum();
}

double product_diff_fro_sq(const Mat& a, const Mat& b, const Mat& c, const Mat& d) {
  if (a.cols() != b.cols() || c.cols() != d.cols())
    throw dimension_error("product_diff_fro_sq: inconsistent factor pairs");
  if (a.rows() != c.rows() || b.rows() != d.rows())
    throw dimension_error("product_diff_fro_sq: outer dimensions differ");
  const double t1 = ((a.transpose() * a).cwiseProduct(b.transpose() * b)).sum();
  const double t2 = ((c.transpose() * c).cwiseProduct(d.transpose() * d)).sum();
  const double t3 = ((c.transpose() * a).cwiseProduct(d.transpose() * b)).sum();
  return std::max(0.0, t1 + t2 - 2.0 * t3);
}

Refactorization svd_refactor(const Mat& a, const Mat& p, const Vec& d) {
  const Index r = a.cols();
  if (p.cols() != r || d.size() != r) throw dimension_error("svd_refactor: column counts must agree");
  if ((d.array() < 0.0).any()) throw validation_error("svd_refactor: D must be nonnegative");
  Eigen::MatrixXd ptp = p.transpose() * p;
  if ((ptp - Eigen::MatrixXd::Identity(r, r)).norm() > 1e-8)
    throw validation_error("svd_refactor: P must have orthonormal columns");

  Eigen::MatrixXd ad = a * d.asDiagonal();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(ad, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd pu = svd.matrixU();
  Eigen::MatrixXd qv = svd.matrixV();
  Vec sv = svd.singularValues();

  // sign convention: first nonzero entry of each left singular vector >= 0
  for (Index j = 0; j < pu.cols(); ++j) {
    for (Index i = 0; i < pu.rows(); ++i) {
      if (pu(i, j) != 0.0) {
        if (pu(i, j) < 0.0) {
          pu.col(j) = -pu.col(j);
          qv.col(j) = -qv.col(j);
        }
        break;
      }
    }
  }

  Refactorization out;
  out.p_hat = Mat::Zero(a.rows(), r);
  out.q_hat = Mat::Zero(r, r);
  out.d_hat = Vec::Zero(r);
  const Index k = sv.size();
  const double cutoff = (k > 0) ? 1e-12 * sv(0) : 0.0;
  for (Index j = 0; j < k; ++j) {
    if (sv(j) > cutoff && sv(j) > 0.0) {
      out.d_hat(j) = std::sqrt(sv(j));  // singular values stored as d_hat^2
      out.p_hat.col(j) = pu.col(j);
      out.q_hat.col(j) = qv.col(j);
    }
  }
  out.u_hat = out.p_hat * out.d_hat.asDiagonal();
  out.v_hat = (p * out.q_hat) * out.d_hat.asDiagonal();
  // columns with flushed singular values stay bitwise zero
  return out;
}

void write_factors(std::ostream& os, const FactorPair& fp) {
  fp.require_consistent();
  os << fp.u.rows() << ' ' << fp.v.rows() << ' ' << fp.u.cols() << '\n';
  os.precision(17);
  for (Index i = 0; i < fp.u.rows(); ++i) {
    for (Index j = 0; j < fp.u.cols(); ++j) os << (j ? " " : "") << fp.u(i, j);
    os << '\n';
  }
  for (Index i = 0; i < fp.v.rows(); ++i) {
    for (Index j = 0; j < fp.v.cols(); ++j) os << (j ? " " : "") << fp.v(i, j);
    os << '\n';
  }
}

FactorPair read_factors(std::istream& is) {
  Index n = 0, m = 0, r = 0;
  if (!(is >> n >> m >> r) || n < 0 || m < 0 || r < 0)
    throw validation_error("factor dump: bad header");
  FactorPair fp;
  fp.u.resize(n, r);
  fp.v.resize(m, r);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < r; ++j)
      if (!(is >> fp.u(i, j))) throw validation_error("factor dump: truncated U block");
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < r; ++j)
      if (!(is >> fp.v(i, j))) throw validation_error("factor dump: truncated V block");
  return fp;
}

void write_factors_file(const std::string& path, const FactorPair& fp) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_factors(os, fp);
  if (!os) throw std::runtime_error("write failed: " + path);
}

FactorPair read_factors_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_factors(is);
}

}  // namespace l20mc
