#include "plfam/fpca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "plfam/util.hpp"

namespace plfam {

FunctionalDataset make_dataset(Vector grid, Matrix values) {
  FunctionalDataset data;
  data.domain_bounds = {grid.size() ? grid[0] : 0.0,
                        grid.size() ? grid[grid.size() - 1] : 1.0};
  data.grid = std::move(grid);
  data.values = std::move(values);
  validate(data);
  return data;
}

void validate(const FunctionalDataset& data) {
  if (data.grid.size() != data.values.cols())
    throw DataError("functional dataset: grid length does not match value columns");
  if (data.values.rows() < 2 || data.values.cols() < 2)
    throw DataError("functional dataset: need at least 2 curves and 2 grid points");
  for (Index j = 1; j < data.grid.size(); ++j)
    if (!(data.grid[j] > data.grid[j - 1]))
      throw DataError("functional dataset: grid must be strictly increasing");
  if (!data.values.allFinite())
    throw DataError("functional dataset: values contain non-finite entries");
  if (data.domain_bounds.first > data.grid[0] ||
      data.domain_bounds.second < data.grid[data.grid.size() - 1])
    throw DataError("functional dataset: domain bounds do not cover the grid");
}

Vector trapezoid_weights(const Vector& grid) {
  const Index n = grid.size();
  if (n < 2) throw std::invalid_argument("trapezoid_weights: need >= 2 points");
  Vector w(n);
  w[0] = 0.5 * (grid[1] - grid[0]);
  for (Index j = 1; j + 1 < n; ++j) w[j] = 0.5 * (grid[j + 1] - grid[j - 1]);
  w[n - 1] = 0.5 * (grid[n - 1] - grid[n - 2]);
  return w;
}

Vector estimate_mean(const FunctionalDataset& data) {
  return data.values.colwise().mean();
}

Matrix estimate_covariance(const FunctionalDataset& data, const Vector& mean) {
  if (mean.size() != data.grid_size())
    throw std::invalid_argument("estimate_covariance: mean length mismatch");
  const Index n = data.n(), m = data.grid_size();
  Matrix centered = data.values.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n);
  // Replace the diagonal with adjacent off-diagonal averages: the raw
  // diagonal carries the measurement-error variance on top of C(t, t).
  Vector diag(m);
  diag[0] = cov(0, 1);
  for (Index j = 1; j + 1 < m; ++j) diag[j] = 0.5 * (cov(j, j - 1) + cov(j, j + 1));
  diag[m - 1] = cov(m - 1, m - 2);
  cov.diagonal() = diag;
  return cov;
}

EigenPairs eigendecompose(const Matrix& cov, const Vector& quadrature_weights,
                          Index num_components) {
  const Index m = cov.rows();
  if (cov.cols() != m) throw std::invalid_argument("eigendecompose: matrix not square");
  if (quadrature_weights.size() != m)
    throw std::invalid_argument("eigendecompose: weight length mismatch");
  if (num_components < 1 || num_components > m)
    throw std::invalid_argument("eigendecompose: K out of range");
  if ((quadrature_weights.array() <= 0.0).any())
    throw std::invalid_argument("eigendecompose: weights must be positive");

  Vector sw = quadrature_weights.array().sqrt();
  Matrix sym = sw.asDiagonal() * cov * sw.asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecompose: symmetric eigen-solver did not converge");

  EigenPairs out;
  out.values.resize(num_components);
  out.functions.resize(num_components, m);
  const double tie_tol = 1e-10;
  for (Index k = 0; k < num_components; ++k) {
    Index src = m - 1 - k;  // Eigen sorts ascending
    out.values[k] = std::max(0.0, es.eigenvalues()[src]);
    Vector psi = es.eigenvectors().col(src).array() / sw.array();
    double norm2 = (quadrature_weights.array() * psi.array().square()).sum();
    if (norm2 > 0.0) psi /= std::sqrt(norm2);
    double integral = quadrature_weights.dot(psi);
    bool flip = false;
    if (integral < -tie_tol) {
      flip = true;
    } else if (integral <= tie_tol) {
      for (Index j = 0; j < m; ++j) {
        if (std::abs(psi[j]) > tie_tol) {
          flip = psi[j] < 0.0;
          break;
        }
      }
    }
    if (flip) psi = -psi;
    out.functions.row(k) = psi.transpose();
  }
  return out;
}

Matrix estimate_scores(const FunctionalDataset& data, const Vector& mean,
                       const Matrix& eigenfunctions,
                       const Vector& quadrature_weights) {
  if (mean.size() != data.grid_size() ||
      eigenfunctions.cols() != data.grid_size() ||
      quadrature_weights.size() != data.grid_size())
    throw std::invalid_argument("estimate_scores: dimension mismatch");
  Matrix centered = data.values.rowwise() - mean.transpose();
  return centered * (quadrature_weights.asDiagonal() * eigenfunctions.transpose());
}

Matrix transform_scores(const Matrix& scores, const Vector& eigenvalues) {
  if (eigenvalues.size() != scores.cols())
    throw std::invalid_argument("transform_scores: eigenvalue count mismatch");
  const double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  Matrix xi(scores.rows(), scores.cols());
  for (Index k = 0; k < scores.cols(); ++k) {
    if (!(eigenvalues[k] > 0.0))
      throw NumericError("transform_scores: component " + std::to_string(k + 1) +
                         " has nonpositive eigenvalue");
    double inv_sd = 1.0 / std::sqrt(eigenvalues[k]);
    for (Index i = 0; i < scores.rows(); ++i)
      xi(i, k) = std::clamp(normal_cdf(scores(i, k) * inv_sd), lo, hi);
  }
  return xi;
}

Index choose_num_components(const Vector& eigenvalues, double fve) {
  double total = eigenvalues.sum();
  if (total <= 0.0) return 1;
  double cum = 0.0;
  for (Index k = 0; k < eigenvalues.size(); ++k) {
    cum += eigenvalues[k];
    if (cum >= fve * total) return k + 1;
  }
  return eigenvalues.size();
}

FpcaFit fit_fpca(const FunctionalDataset& data, Index num_components) {
  validate(data);
  FpcaFit fit;
  fit.grid = data.grid;
  fit.quadrature_weights = trapezoid_weights(data.grid);
  fit.mean = estimate_mean(data);
  Matrix cov = estimate_covariance(data, fit.mean);

  Index k = num_components;
  if (k == 0) {
    EigenPairs all = eigendecompose(cov, fit.quadrature_weights, data.grid_size());
    k = choose_num_components(all.values);
    fit.eigenvalues = all.values.head(k);
    fit.eigenfunctions = all.functions.topRows(k);
  } else {
    EigenPairs pairs = eigendecompose(cov, fit.quadrature_weights, k);
    fit.eigenvalues = pairs.values;
    fit.eigenfunctions = pairs.functions;
  }
  fit.scores = estimate_scores(data, fit.mean, fit.eigenfunctions, fit.quadrature_weights);
  fit.transformed_scores = transform_scores(fit.scores, fit.eigenvalues);
  return fit;
}

Matrix transform_new_curves(const FpcaFit& fit, const FunctionalDataset& data) {
  validate(data);
  if (data.grid.size() != fit.grid.size())
    throw DataError("new curves: grid size differs from the training grid");
  double scale = std::max(1.0, fit.grid.cwiseAbs().maxCoeff());
  if ((data.grid - fit.grid).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw DataError("new curves: grid does not match the training grid");
  Matrix scores = estimate_scores(data, fit.mean, fit.eigenfunctions,
                                  fit.quadrature_weights);
  return transform_scores(scores, fit.eigenvalues);
}

}  // namespace plfam
