#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace l20mc {

// Row-major throughout: factor rows are the unit of access in the sparse
// kernels (one row per observed index), so they must be contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class solver_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace l20mc
