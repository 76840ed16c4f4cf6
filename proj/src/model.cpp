#include "plfam/model.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace plfam {

CandidateSpec make_candidate(std::vector<Index> scalar_columns,
                             std::vector<Index> score_columns,
                             const SplineBasis& shared_basis,
                             bool include_intercept) {
  CandidateSpec spec;
  spec.scalar_columns = std::move(scalar_columns);
  spec.score_columns = std::move(score_columns);
  spec.bases.assign(spec.score_columns.size(), shared_basis);
  spec.include_intercept = include_intercept;
  return spec;
}

static void check_unique_in_range(const std::vector<Index>& idx, Index bound,
                                  const char* what) {
  std::vector<Index> sorted = idx;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= bound)
      throw DataError(std::string(what) + " index " +
                      std::to_string(sorted[i]) + " out of range [0, " +
                      std::to_string(bound) + ")");
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw DataError(std::string(what) + " index " +
                      std::to_string(sorted[i]) + " listed twice");
  }
}

void validate(const CandidateSpec& spec, Index n_scalars, Index n_scores) {
  check_unique_in_range(spec.scalar_columns, n_scalars, "scalar");
  check_unique_in_range(spec.score_columns, n_scores, "score");
  if (spec.bases.size() != spec.score_columns.size())
    throw DataError("candidate has " + std::to_string(spec.bases.size()) +
                    " bases for " + std::to_string(spec.score_columns.size()) +
                    " score columns");
  for (const auto& b : spec.bases)
    if (b.n_basis < b.order) throw DataError("candidate basis is empty");
}

// Columns are laid out in ascending index order no matter how the spec lists
// them, so permuted specs produce identical designs.
static CandidateSpec normalized(const CandidateSpec& spec) {
  CandidateSpec out = spec;
  std::sort(out.scalar_columns.begin(), out.scalar_columns.end());
  std::vector<std::size_t> perm(spec.score_columns.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    return spec.score_columns[a] < spec.score_columns[b];
  });
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.score_columns[i] = spec.score_columns[perm[i]];
    out.bases[i] = spec.bases[perm[i]];
  }
  return out;
}

static DesignLayout make_layout(const CandidateSpec& spec) {
  DesignLayout layout;
  layout.intercept = spec.include_intercept;
  layout.scalar_columns = spec.scalar_columns;
  layout.score_columns = spec.score_columns;
  Index off = (layout.intercept ? 1 : 0) +
              static_cast<Index>(spec.scalar_columns.size());
  for (const auto& b : spec.bases) {
    layout.block_offsets.push_back(off);
    layout.block_sizes.push_back(b.n_basis);
    off += b.n_basis;
  }
  layout.cols = off;
  return layout;
}

Design assemble_design(const CandidateSpec& spec, const Matrix& scalars,
                       const Matrix& transformed_scores) {
  if (scalars.rows() != transformed_scores.rows() && scalars.size() > 0 &&
      transformed_scores.size() > 0)
    throw DataError("scalar and score tables have different row counts");
  const Index n = std::max(scalars.rows(), transformed_scores.rows());
  if (n == 0) throw DataError("design has no rows");
  validate(spec, scalars.cols(), transformed_scores.cols());
  const CandidateSpec norm = normalized(spec);

  Design design;
  design.layout = make_layout(norm);
  design.matrix.resize(n, design.layout.cols);

  Index col = 0;
  if (design.layout.intercept) design.matrix.col(col++).setOnes();
  for (Index j : norm.scalar_columns)
    design.matrix.col(col++) = scalars.col(j);
  for (std::size_t k = 0; k < norm.score_columns.size(); ++k) {
    Index clamped = 0;
    Matrix block = eval_basis_matrix(
        norm.bases[k], transformed_scores.col(norm.score_columns[k]), &clamped);
    design.matrix.middleCols(design.layout.block_offsets[k],
                             design.layout.block_sizes[k]) = block;
    design.clamped += clamped;
  }
  return design;
}

std::vector<PenaltyBlock> penalty_blocks(const CandidateSpec& spec,
                                         const DesignLayout& layout) {
  const CandidateSpec norm = normalized(spec);
  std::vector<PenaltyBlock> blocks;
  blocks.reserve(norm.bases.size());
  for (std::size_t k = 0; k < norm.bases.size(); ++k) {
    PenaltyBlock b;
    b.offset = layout.block_offsets[k];
    b.matrix = penalty_matrix(norm.bases[k]);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

namespace {

struct PenalizedSolve {
  Vector theta;
  double edf = 0.0;
  bool used_jitter = false;
  bool ok = false;
};

// On the diagonally equilibrated matrix every pivot of a well posed system
// is O(1); exact rank deficiency leaves pivots at rounding level. Eigen's
// LLT reports success on exactly singular input when rounding keeps a pivot
// barely positive, so the threshold test is needed as well.
bool factor_is_usable(const Eigen::LLT<Matrix>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const Vector piv = Matrix(llt.matrixL()).diagonal();
  return piv.minCoeff() > 1e-7;  // pivot^2 above 1e-14
}

// Normal equations with the block penalty added, solved on the Jacobi
// equilibrated system D^-1 A D^-1 so that pivot checks are scale free even
// when tau inflates the basis-block diagonal. The ridge retry adds
// 1e-10 * diag(A), a relative perturbation that covers the exactly singular
// case (intercept plus a basis whose columns sum to one) without distorting
// the data term. Zero diagonals (all-zero columns) pin the coefficient to 0.
PenalizedSolve solve_penalized(const Matrix& ztz, const Vector& zty,
                               const std::vector<PenaltyBlock>& penalties,
                               double tau) {
  Matrix a = ztz;
  for (const auto& p : penalties)
    a.block(p.offset, p.offset, p.matrix.rows(), p.matrix.cols()) +=
        tau * p.matrix;

  PenalizedSolve out;
  if (!a.allFinite() || a.diagonal().maxCoeff() <= 0.0) return out;

  Vector dinv(a.cols());
  for (Index j = 0; j < a.cols(); ++j)
    dinv[j] = a(j, j) > 0.0 ? 1.0 / std::sqrt(a(j, j)) : 0.0;
  const Matrix b = dinv.asDiagonal() * a * dinv.asDiagonal();

  Eigen::LLT<Matrix> llt(b);
  if (!factor_is_usable(llt)) {
    Matrix bj = b;
    bj.diagonal().array() += 1e-10;
    llt.compute(bj);
    if (!factor_is_usable(llt)) return out;
    out.used_jitter = true;
  }

  const Vector rhs = dinv.asDiagonal() * zty;
  Vector theta = llt.solve(rhs);
  const Matrix m = dinv.asDiagonal() * ztz * dinv.asDiagonal();
  if (!out.used_jitter) {
    out.edf = llt.solve(m).trace();
  } else {
    // One refinement pass against the unperturbed matrix. The normal
    // equations are consistent even when b is singular (the right hand side
    // lies in its range), so this removes the ridge bias from the solution
    // while leaving only a harmless null-space component.
    theta += llt.solve(Vector(rhs - b * theta));
    // The jittered factor cannot produce an accurate trace: its smallest
    // pivot carries a relative error of eps over the ridge size. The
    // spectral form of tr(B^+ M) sidesteps that, dropping rounding-level
    // modes as exact rank losses. Every kept mode contributes
    // (v'Mv)/lambda in [0, 1], so nothing is amplified.
    Eigen::SelfAdjointEigenSolver<Matrix> es(b);
    if (es.info() != Eigen::Success) return out;
    const Vector lam = es.eigenvalues();
    const double cutoff =
        static_cast<double>(lam.size()) * lam.cwiseAbs().maxCoeff() * 1e-12;
    double edf = 0.0;
    for (Index i = 0; i < lam.size(); ++i) {
      if (lam[i] <= cutoff) continue;
      const Vector v = es.eigenvectors().col(i);
      edf += v.dot(m * v) / lam[i];
    }
    out.edf = edf;
  }
  out.theta = dinv.asDiagonal() * theta;
  out.ok = out.theta.allFinite() && std::isfinite(out.edf);
  return out;
}

}  // namespace

FittedCandidate fit_penalized(const Design& design,
                              const std::vector<PenaltyBlock>& penalties,
                              const Vector& y, double tau) {
  if (y.size() != design.matrix.rows())
    throw DataError("response length does not match design rows");
  if (!(tau >= 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("smoothing parameter must be nonnegative");

  const Matrix ztz = design.matrix.transpose() * design.matrix;
  const Vector zty = design.matrix.transpose() * y;
  PenalizedSolve sol = solve_penalized(ztz, zty, penalties, tau);
  if (!sol.ok)
    throw NumericError(
        "penalized normal equations are not positive definite after ridge "
        "retry (tau=" +
        std::to_string(tau) + ")");

  FittedCandidate fit;
  fit.coefficients = std::move(sol.theta);
  fit.smoothing_tau = tau;
  fit.edf = sol.edf;
  fit.used_jitter = sol.used_jitter;
  fit.layout = design.layout;
  const Vector resid = y - design.matrix * fit.coefficients;
  fit.sigma2_hat = resid.squaredNorm() / static_cast<double>(y.size());
  return fit;
}

Vector solve_penalized_coefficients(const Matrix& ztz, const Vector& zty,
                                    const std::vector<PenaltyBlock>& penalties,
                                    double tau) {
  PenalizedSolve sol = solve_penalized(ztz, zty, penalties, tau);
  if (!sol.ok)
    throw NumericError(
        "penalized normal equations are not positive definite after ridge "
        "retry (tau=" +
        std::to_string(tau) + ")");
  return std::move(sol.theta);
}

Vector default_tau_grid() {
  const Index count = 25;
  Vector grid(count);
  const double lo = std::log(1e-6), hi = std::log(1e4);
  for (Index i = 0; i < count; ++i)
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(count - 1));
  return grid;
}

SmoothingSelection select_smoothing(const Design& design,
                                    const std::vector<PenaltyBlock>& penalties,
                                    const Vector& y, const Vector& tau_grid) {
  if (tau_grid.size() == 0)
    throw std::invalid_argument("smoothing grid is empty");
  if (y.size() != design.matrix.rows())
    throw DataError("response length does not match design rows");

  const double n = static_cast<double>(y.size());
  const Matrix ztz = design.matrix.transpose() * design.matrix;
  const Vector zty = design.matrix.transpose() * y;

  SmoothingSelection sel;
  sel.gcv = Vector::Constant(tau_grid.size(),
                             std::numeric_limits<double>::infinity());
  Index best = -1;
  for (Index i = 0; i < tau_grid.size(); ++i) {
    PenalizedSolve sol = solve_penalized(ztz, zty, penalties, tau_grid[i]);
    if (!sol.ok) continue;
    const double denom = n - sol.edf;
    if (!(denom > 0.0)) continue;
    const double rss = (y - design.matrix * sol.theta).squaredNorm();
    const double gcv = n * rss / (denom * denom);
    if (!std::isfinite(gcv)) continue;
    sel.gcv[i] = gcv;
    if (best < 0 || gcv < sel.gcv[best]) best = i;
  }
  if (best < 0)
    throw NumericError("no smoothing grid point produced a usable fit");
  sel.tau = tau_grid[best];
  return sel;
}

Vector predict(const FittedCandidate& fit, const CandidateSpec& spec,
               const Matrix& new_scalars, const Matrix& new_transformed_scores,
               Index* clamped) {
  Design design = assemble_design(spec, new_scalars, new_transformed_scores);
  if (design.layout.cols != fit.coefficients.size())
    throw DataError("candidate layout does not match fitted coefficients");
  if (clamped) *clamped = design.clamped;
  return design.matrix * fit.coefficients;
}

}  // namespace plfam
