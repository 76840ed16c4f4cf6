#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plfam/averaging.hpp"
#include "plfam/fpca.hpp"
#include "plfam/model.hpp"
#include "plfam/types.hpp"

namespace plfam {

enum class Method { Aic, Bic, Saic, Sbic, Cvma };

Method parse_method(const std::string& name);  // "aic" | ... | "cvma"
std::string method_name(Method method);

struct PipelineConfig {
  CandidateMode mode = CandidateMode::Nested;
  std::vector<Index> scalar_pool;  // 0-based columns of the scalar matrix
  std::vector<Index> score_pool;   // 0-based transformed-score components
  Index q_folds = 5;
  std::uint64_t seed = 0;
  Index n_interior = 0;  // 0 selects the n^(1/4) rule
  int spline_order = 4;
  Vector tau_grid;  // empty selects the default grid
};

// Everything a prediction needs: the FPCA system, the candidate set with
// full-sample fits, the information-criterion scores and the
// cross-validation weights.
struct AveragedFit {
  FpcaFit fpca;
  SplineBasis basis;
  std::vector<CandidateSpec> specs;
  std::vector<FittedCandidate> fits;
  CriterionScores criteria;
  WeightVector cv_weights;
  FoldPlan plan;
  PipelineConfig config;
};

// Full training path: FPCA with K = largest requested component, smoothing
// selection and penalized fit per candidate, Q-fold prediction matrix,
// simplex-constrained weight solve, criterion scores.
AveragedFit fit_averaging(const Matrix& scalars,
                          const FunctionalDataset& curves, const Vector& y,
                          const PipelineConfig& config);

// Prediction with precomputed transformed scores (columns must cover the
// components the candidates use).
Vector predict_method_scores(const AveragedFit& fit, Method method,
                             const Matrix& new_scalars,
                             const Matrix& new_transformed_scores);

// Prediction from raw curves: scores new curves with the training FPCA
// system, then applies the requested method's weights.
Vector predict_method(const AveragedFit& fit, Method method,
                      const Matrix& new_scalars,
                      const FunctionalDataset& new_curves);

// Per-method weight vector over candidates (degenerate one-hot for AIC/BIC).
Vector method_weights(const AveragedFit& fit, Method method);

}  // namespace plfam
