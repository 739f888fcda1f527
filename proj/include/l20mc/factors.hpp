#pragma once

#include <iosfwd>
#include <vector>

#include "l20mc/common.hpp"
#include "l20mc/observations.hpp"

namespace l20mc {

// A factor pair (U, V) representing X = U V^T, U n x r, V m x r.
struct FactorPair {
  Mat u;
  Mat v;

  Index rank_budget() const { return u.cols(); }
  void require_consistent() const {
    if (u.cols() != v.cols()) throw dimension_error("factor pair: unequal column counts");
  }
};

struct RegWeights {
  double lambda = 0.0;  // column l2,0 weight
  double mu = 1e-8;     // ridge weight

  void validate() const {
    if (lambda < 0.0) throw validation_error("lambda must be nonnegative");
    if (mu <= 0.0) throw validation_error("mu must be positive");
  }
};

// Indices of columns with at least one nonzero entry. Exact comparison:
// the prox operators emit exact zeros, so no tolerance is involved.
std::vector<Index> nonzero_columns(const Mat& m);
Index count_nonzero_columns(const Mat& m);

// Phi_{lambda,mu}(U,V) = f(UV^T) + mu/2 (||U||_F^2 + ||V||_F^2)
//                        + lambda (||U||_{2,0} + ||V||_{2,0})
double eval_phi(const ObservationSet& obs, const FactorPair& fp, const RegWeights& w);

// The smooth part: eval_phi with lambda = 0.
double eval_f_mu(const ObservationSet& obs, const FactorPair& fp, double mu);

// Numerical rank of U V^T without forming it: thin QR of U and V, SVD of
// R_U R_V^T, count singular values above rel_tol * sigma_1.
inline constexpr double kDefaultRankTol = 1e-6;
Index numerical_rank(const FactorPair& fp, double rel_tol = kDefaultRankTol);

// ||U^T U - V^T V||_F, the balancedness diagnostic (vanishes at critical
// points).
double balance_residual(const FactorPair& fp);

// ||U V^T||_F^2 through the Gram identity trace((U^T U)(V^T V)).
double product_fro_sq(const FactorPair& fp);
// ||A B^T - C D^T||_F^2 through r x r / s x s traces.
double product_diff_fro_sq(const Mat& a, const Mat& b, const Mat& c, const Mat& d);

// Result of rewriting A (P D)^T as balanced factors through a thin SVD of
// A D = p_hat * d_hat^2 * q_hat^T:
//   u_hat = p_hat d_hat,  v_hat = P q_hat d_hat,
// so u_hat v_hat^T = A (P D)^T and u_hat^T u_hat = v_hat^T v_hat = d_hat^2.
struct Refactorization {
  Mat u_hat;   // n x r
  Mat v_hat;   // m x r
  Mat p_hat;   // n x r, orthonormal columns
  Mat q_hat;   // r x r, orthonormal
  Vec d_hat;   // r, nonnegative, nonincreasing
};

// Preconditions: P has orthonormal columns (||P^T P - I|| <= 1e-8), D
// diagonal nonnegative (given as a vector). Singular values below
// 1e-12 * sigma_1 are flushed to exact zero along with the matching
// columns of u_hat and v_hat. Column signs follow the convention that the
// first nonzero entry of each left singular vector is nonnegative.
Refactorization svd_refactor(const Mat& a, const Mat& p, const Vec& d);

// Factor dump: text, header "n m r", then the rows of U and the rows of V.
void write_factors(std::ostream& os, const FactorPair& fp);
FactorPair read_factors(std::istream& is);
void write_factors_file(const std::string& path, const FactorPair& fp);
FactorPair read_factors_file(const std::string& path);

}  // namespace l20mc
