#pragma once

#include <cstdint>
#include <vector>

#include "plfam/model.hpp"
#include "plfam/types.hpp"

namespace plfam {

enum class CandidateMode { Nested, NonNested };

// Candidate models over the given column pools. Nested mode pairs every
// prefix of the scalar pool with every prefix of the score pool (pool order
// preserved); non-nested mode pairs all nonempty subsets of each pool.
// Enumeration order is deterministic: prefix pairs in (a, b) lexicographic
// order, subset pairs lexicographic in the index vectors.
std::vector<CandidateSpec> enumerate_candidates(
    CandidateMode mode, const std::vector<Index>& scalar_pool,
    const std::vector<Index>& score_pool, const SplineBasis& shared_basis,
    bool include_intercept = true);

// Q-fold split: a seeded permutation dealt round-robin, fold ids 1..Q.
struct FoldPlan {
  Index q = 0;
  std::vector<int> assignment;   // length n, values in 1..Q
  std::vector<Index> fold_sizes; // length Q
};

FoldPlan make_fold_plan(Index n, Index q, std::uint64_t seed);

// Entry (i, m): prediction of y_i by candidate m refit without i's fold.
struct CvPredictionMatrix {
  Matrix matrix;  // n x M
  FoldPlan plan;
};

// Smoothing parameters are fixed per candidate (selected on the full sample
// beforehand); each fold refit solves the penalized normal equations on the
// complement. Candidates run in parallel.
CvPredictionMatrix cv_prediction_matrix(const std::vector<CandidateSpec>& specs,
                                        const Matrix& scalars,
                                        const Matrix& transformed_scores,
                                        const Vector& y,
                                        const std::vector<double>& taus,
                                        const FoldPlan& plan);

// E = (P - y 1^T)^T (P - y 1^T): the Gram matrix of out-of-fold residual
// columns, so w^T E w is the Q-fold criterion of the w-averaged prediction.
Matrix cv_quadratic_form(const Matrix& cv_predictions, const Vector& y);

struct WeightVector {
  Vector weights;
  double objective = 0.0;
  Index solver_iterations = 0;
  bool converged = false;
};

// min w^T E w over the probability simplex by accelerated projected
// gradient from the uniform start; stops when max|w_{t+1} - w_t| <= 1e-12
// or after 100000 iterations (converged=false). E must be symmetric and
// PSD up to a -1e-10 relative tolerance.
WeightVector solve_simplex_qp(const Matrix& e);

// Exact Euclidean projection onto {w >= 0, sum w = 1}.
Vector project_simplex(const Vector& v);

struct CriterionScores {
  Vector aic;        // n log(sigma2_m) + 2 df_m
  Vector bic;        // n log(sigma2_m) + log(n) df_m
  Index aic_index = 0;  // argmin, ties resolve to the smallest index
  Index bic_index = 0;
  Vector saic;       // softmax of -score/2, min-shifted for overflow safety
  Vector sbic;
};

CriterionScores criterion_scores(const std::vector<FittedCandidate>& fits,
                                 Index n);

// Convex combination of per-candidate predictions; candidates with weight
// below 1e-8 are skipped.
Vector averaged_predict(const std::vector<FittedCandidate>& fits,
                        const std::vector<CandidateSpec>& specs,
                        const Vector& weights, const Matrix& new_scalars,
                        const Matrix& new_transformed_scores);

}  // namespace plfam
