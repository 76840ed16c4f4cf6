#pragma once

#include <utility>

#include "plfam/types.hpp"

namespace plfam {

// n curves observed without gaps on one shared, strictly increasing grid.
// Row i of `values` holds the (possibly noise-contaminated) observations of
// curve i at the grid points.
struct FunctionalDataset {
  Vector grid;                             // length N, strictly increasing
  Matrix values;                           // n x N
  std::pair<double, double> domain_bounds; // (a, b), a <= t_1, t_N <= b

  Index n() const { return values.rows(); }
  Index grid_size() const { return values.cols(); }
};

FunctionalDataset make_dataset(Vector grid, Matrix values);
void validate(const FunctionalDataset& data);

// Karhunen-Loeve estimate from dense regular observations: mean curve,
// nonincreasing eigenvalues, eigenfunctions orthonormal under the trapezoid
// quadrature, raw scores and their probit transforms in (0, 1).
struct FpcaFit {
  Vector grid;
  Vector mean;                // length N
  Vector eigenvalues;         // length K, nonincreasing, >= 0
  Matrix eigenfunctions;      // K x N, rows on the grid
  Matrix scores;              // n x K
  Matrix transformed_scores;  // n x K, entries in (0, 1)
  Vector quadrature_weights;  // length N, positive
};

// Trapezoid weights for the (strictly increasing) grid.
Vector trapezoid_weights(const Vector& grid);

// Cross-sectional average of each grid column.
Vector estimate_mean(const FunctionalDataset& data);

// Sample covariance (1/n normalization) with the diagonal replaced by the
// average of the two adjacent off-diagonal entries (one-sided at the
// boundaries), which strips the measurement-error variance contributed to
// the diagonal by the noise in the discrete observations.
Matrix estimate_covariance(const FunctionalDataset& data, const Vector& mean);

struct EigenPairs {
  Vector values;     // K, nonincreasing, clamped at 0
  Matrix functions;  // K x N
};

// Discretized covariance-operator eigenproblem: with W = diag(weights),
// eigenpairs of W^{1/2} C W^{1/2} are computed and eigenvectors mapped back
// by W^{-1/2}, rescaled to unit quadrature norm. Signs are fixed so each
// eigenfunction has nonnegative quadrature integral (first nonzero grid
// value positive on ties).
EigenPairs eigendecompose(const Matrix& cov, const Vector& quadrature_weights,
                          Index num_components);

// Quadrature scores: zeta_ik = sum_j w_j (U_ij - mean_j) psi_k(t_j).
Matrix estimate_scores(const FunctionalDataset& data, const Vector& mean,
                       const Matrix& eigenfunctions,
                       const Vector& quadrature_weights);

// Probit transform xi_ik = Phi(zeta_ik / sqrt(lambda_k)), clamped into the
// open interval (0, 1). Throws if any used eigenvalue is <= 0.
Matrix transform_scores(const Matrix& scores, const Vector& eigenvalues);

// Smallest K whose leading eigenvalues explain `fve` of the total.
Index choose_num_components(const Vector& eigenvalues, double fve = 0.999);

// Full estimation path. num_components == 0 selects K by the 99.9% rule.
FpcaFit fit_fpca(const FunctionalDataset& data, Index num_components = 0);

// Scores and transformed scores of new curves on the same grid, using the
// training mean/eigenfunctions/eigenvalues.
Matrix transform_new_curves(const FpcaFit& fit, const FunctionalDataset& data);

}  // namespace plfam
