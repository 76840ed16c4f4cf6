#pragma once

#include <vector>

#include "plfam/spline.hpp"
#include "plfam/types.hpp"

namespace plfam {

// One candidate model: a subset of scalar covariate columns entering
// linearly plus a subset of transformed-score columns entering through
// B-spline blocks. `bases` is aligned with `score_columns`.
struct CandidateSpec {
  std::vector<Index> scalar_columns;
  std::vector<Index> score_columns;
  std::vector<SplineBasis> bases;
  bool include_intercept = true;
};

CandidateSpec make_candidate(std::vector<Index> scalar_columns,
                             std::vector<Index> score_columns,
                             const SplineBasis& shared_basis,
                             bool include_intercept = true);

void validate(const CandidateSpec& spec, Index n_scalars, Index n_scores);

// Column layout of an assembled design: intercept first (when present),
// then the selected scalar columns, then one contiguous basis block per
// score column.
struct DesignLayout {
  bool intercept = true;
  std::vector<Index> scalar_columns;
  std::vector<Index> score_columns;
  std::vector<Index> block_offsets;
  std::vector<Index> block_sizes;
  Index cols = 0;
};

struct Design {
  Matrix matrix;  // n x cols
  DesignLayout layout;
  Index clamped = 0;  // score values clamped into [0, 1] during assembly
};

Design assemble_design(const CandidateSpec& spec, const Matrix& scalars,
                       const Matrix& transformed_scores);

// Penalty matrix of block k placed at its column offset.
struct PenaltyBlock {
  Index offset = 0;
  Matrix matrix;
};

std::vector<PenaltyBlock> penalty_blocks(const CandidateSpec& spec,
                                         const DesignLayout& layout);

// Penalized least squares result for one candidate.
struct FittedCandidate {
  Vector coefficients;
  double smoothing_tau = 0.0;
  double edf = 0.0;         // trace of the hat matrix
  double sigma2_hat = 0.0;  // ||Y - Yhat||^2 / n
  DesignLayout layout;
  bool used_jitter = false;
};

// Solves (Z'Z + S_tau) theta = Z'Y with S_tau zero on intercept/scalar
// columns and tau * S_k on each basis block. A Cholesky factorization is
// attempted first; if it fails (including near-singular pivots), one retry
// adds a ridge of 1e-10 * trace(Z'Z), after which failure is an error.
FittedCandidate fit_penalized(const Design& design,
                              const std::vector<PenaltyBlock>& penalties,
                              const Vector& y, double tau);

// Coefficient solve on precomputed Gram blocks (Z'Z, Z'Y); same
// factorization and ridge-retry policy as fit_penalized. Lets fold refits
// reuse downdated Gram matrices instead of reassembling designs.
Vector solve_penalized_coefficients(const Matrix& ztz, const Vector& zty,
                                    const std::vector<PenaltyBlock>& penalties,
                                    double tau);

// 25 log-spaced values in [1e-6, 1e4].
Vector default_tau_grid();

struct SmoothingSelection {
  double tau = 0.0;
  Vector gcv;  // one entry per grid point, +inf where the fit failed
};

// Grid search for the GCV-minimizing tau; ties resolve to the smaller tau.
SmoothingSelection select_smoothing(const Design& design,
                                    const std::vector<PenaltyBlock>& penalties,
                                    const Vector& y, const Vector& tau_grid);

// Assembles new rows with the training layout and applies the coefficients.
Vector predict(const FittedCandidate& fit, const CandidateSpec& spec,
               const Matrix& new_scalars, const Matrix& new_transformed_scores,
               Index* clamped = nullptr);

}  // namespace plfam
