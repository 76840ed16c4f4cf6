#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace plfam {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Bad or inconsistent input data (CSV contents, mismatched dimensions,
// out-of-range configuration). Maps to CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical procedure failed (factorization, eigen-solver, non-convergence).
// Maps to CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace plfam
