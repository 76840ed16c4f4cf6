#include "plfam/averaging.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "plfam/rng.hpp"
#include "plfam/util.hpp"

namespace plfam {

namespace {

// nonempty subsets of `pool` in lexicographic order of the index vectors
void emit_subsets(const std::vector<Index>& pool, std::size_t start,
                  std::vector<Index>& prefix,
                  std::vector<std::vector<Index>>& out) {
  for (std::size_t i = start; i < pool.size(); ++i) {
    prefix.push_back(pool[i]);
    out.push_back(prefix);
    emit_subsets(pool, i + 1, prefix, out);
    prefix.pop_back();
  }
}

std::vector<std::vector<Index>> nonempty_subsets(
    const std::vector<Index>& pool) {
  std::vector<std::vector<Index>> out;
  std::vector<Index> prefix;
  emit_subsets(pool, 0, prefix, out);
  return out;
}

}  // namespace

std::vector<CandidateSpec> enumerate_candidates(
    CandidateMode mode, const std::vector<Index>& scalar_pool,
    const std::vector<Index>& score_pool, const SplineBasis& shared_basis,
    bool include_intercept) {
  if (scalar_pool.empty() || score_pool.empty())
    throw DataError("candidate pools must be nonempty");

  std::vector<CandidateSpec> specs;
  if (mode == CandidateMode::Nested) {
    for (std::size_t a = 1; a <= scalar_pool.size(); ++a)
      for (std::size_t b = 1; b <= score_pool.size(); ++b)
        specs.push_back(make_candidate(
            {scalar_pool.begin(), scalar_pool.begin() + a},
            {score_pool.begin(), score_pool.begin() + b}, shared_basis,
            include_intercept));
  } else {
    const auto scalar_subsets = nonempty_subsets(scalar_pool);
    const auto score_subsets = nonempty_subsets(score_pool);
    for (const auto& s : scalar_subsets)
      for (const auto& t : score_subsets)
        specs.push_back(make_candidate(s, t, shared_basis, include_intercept));
  }
  return specs;
}

FoldPlan make_fold_plan(Index n, Index q, std::uint64_t seed) {
  if (q < 2 || q > n)
    throw std::invalid_argument("fold count must satisfy 2 <= Q <= n");
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(perm);

  FoldPlan plan;
  plan.q = q;
  plan.assignment.assign(n, 0);
  plan.fold_sizes.assign(q, 0);
  for (Index i = 0; i < n; ++i) {
    const int fold = static_cast<int>(i % q) + 1;
    plan.assignment[perm[i]] = fold;
    ++plan.fold_sizes[fold - 1];
  }
  return plan;
}

CvPredictionMatrix cv_prediction_matrix(const std::vector<CandidateSpec>& specs,
                                        const Matrix& scalars,
                                        const Matrix& transformed_scores,
                                        const Vector& y,
                                        const std::vector<double>& taus,
                                        const FoldPlan& plan) {
  const Index n = y.size();
  const Index m_count = static_cast<Index>(specs.size());
  if (specs.size() != taus.size())
    throw std::invalid_argument("one smoothing parameter per candidate");
  if (static_cast<Index>(plan.assignment.size()) != n)
    throw DataError("fold plan does not cover the sample");
  if (m_count == 0) throw DataError("no candidates to cross-validate");

  // row indices per fold, fixed across candidates
  std::vector<std::vector<Index>> fold_rows(plan.q);
  for (Index i = 0; i < n; ++i) {
    const int f = plan.assignment[i];
    if (f < 1 || f > plan.q) throw DataError("fold id out of range");
    fold_rows[f - 1].push_back(i);
  }
  for (const auto& rows : fold_rows)
    if (rows.empty()) throw DataError("empty fold in plan");

  CvPredictionMatrix cv;
  cv.plan = plan;
  cv.matrix.resize(n, m_count);

  parallel_for(m_count, [&](Index m) {
    const Design design =
        assemble_design(specs[m], scalars, transformed_scores);
    const auto blocks = penalty_blocks(specs[m], design.layout);
    const Matrix gram_full = design.matrix.transpose() * design.matrix;
    const Vector zty_full = design.matrix.transpose() * y;

    for (Index f = 0; f < plan.q; ++f) {
      const auto& rows = fold_rows[f];
      Matrix z_fold(static_cast<Index>(rows.size()), design.layout.cols);
      Vector y_fold(static_cast<Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        z_fold.row(static_cast<Index>(r)) = design.matrix.row(rows[r]);
        y_fold[static_cast<Index>(r)] = y[rows[r]];
      }
      const Matrix gram = gram_full - z_fold.transpose() * z_fold;
      const Vector zty = zty_full - z_fold.transpose() * y_fold;
      Vector theta;
      try {
        theta = solve_penalized_coefficients(gram, zty, blocks, taus[m]);
      } catch (const NumericError& err) {
        throw NumericError("candidate " + std::to_string(m + 1) + ", fold " +
                           std::to_string(f + 1) + ": " + err.what());
      }
      const Vector pred = z_fold * theta;
      for (std::size_t r = 0; r < rows.size(); ++r)
        cv.matrix(rows[r], m) = pred[static_cast<Index>(r)];
    }
  });

  if (!cv.matrix.allFinite())
    throw NumericError("cross-validation predictions are not finite");
  return cv;
}

Matrix cv_quadratic_form(const Matrix& cv_predictions, const Vector& y) {
  if (cv_predictions.rows() != y.size())
    throw DataError("prediction matrix rows do not match the response");
  Matrix resid = cv_predictions.colwise() - y;
  Matrix e = Matrix::Zero(resid.cols(), resid.cols());
  e.selfadjointView<Eigen::Lower>().rankUpdate(resid.transpose());
  e.triangularView<Eigen::StrictlyUpper>() =
      e.transpose().triangularView<Eigen::StrictlyUpper>();
  return e;
}

Vector project_simplex(const Vector& v) {
  const Index m = v.size();
  std::vector<double> u(v.data(), v.data() + m);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double acc = 0.0, theta = 0.0;
  Index rho = 0;
  for (Index j = 0; j < m; ++j) {
    acc += u[j];
    const double candidate = (acc - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) {
      rho = j + 1;
      theta = candidate;
    }
  }
  (void)rho;
  return (v.array() - theta).cwiseMax(0.0);
}

WeightVector solve_simplex_qp(const Matrix& e) {
  const Index m = e.rows();
  if (m == 0 || e.cols() != m)
    throw std::invalid_argument("weight matrix must be square and nonempty");
  const double scale = std::max(1.0, e.cwiseAbs().maxCoeff());
  if ((e - e.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("weight matrix must be symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> es(e, Eigen::EigenvaluesOnly);
  const double lambda_min = es.eigenvalues().minCoeff();
  const double lambda_max = es.eigenvalues().maxCoeff();
  if (lambda_min < -1e-10 * scale)
    throw NumericError("cross-validation quadratic form is indefinite");

  WeightVector out;
  out.weights = Vector::Constant(m, 1.0 / static_cast<double>(m));
  if (m == 1 || lambda_max <= 0.0) {
    out.objective = out.weights.dot(e * out.weights);
    out.converged = true;
    return out;
  }

  const double step = 1.0 / (2.0 * lambda_max);
  Vector w = out.weights, w_prev = w, v = w;
  double t = 1.0;
  const Index max_iter = 100000;
  for (Index it = 1; it <= max_iter; ++it) {
    w_prev = w;
    w = project_simplex(v - step * 2.0 * (e * v));
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    v = w + ((t - 1.0) / t_next) * (w - w_prev);
    t = t_next;
    out.solver_iterations = it;
    if ((w - w_prev).cwiseAbs().maxCoeff() <= 1e-12) {
      out.converged = true;
      break;
    }
  }
  w = w.cwiseMax(0.0);
  w /= w.sum();
  out.weights = w;
  out.objective = w.dot(e * w);
  return out;
}

CriterionScores criterion_scores(const std::vector<FittedCandidate>& fits,
                                 Index n) {
  const Index m = static_cast<Index>(fits.size());
  if (m == 0) throw std::invalid_argument("no fitted candidates");
  if (n < 1) throw std::invalid_argument("sample size must be positive");

  CriterionScores scores;
  scores.aic.resize(m);
  scores.bic.resize(m);
  const double log_n = std::log(static_cast<double>(n));
  for (Index i = 0; i < m; ++i) {
    const double s2 = fits[i].sigma2_hat;
    if (!(s2 > 0.0))
      throw NumericError("candidate " + std::to_string(i + 1) +
                         " has zero residual variance; criterion undefined");
    const double fit_term = static_cast<double>(n) * std::log(s2);
    scores.aic[i] = fit_term + 2.0 * fits[i].edf;
    scores.bic[i] = fit_term + log_n * fits[i].edf;
  }

  auto argmin = [](const Vector& v) {
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i)
      if (v[i] < v[best]) best = i;
    return best;
  };
  scores.aic_index = argmin(scores.aic);
  scores.bic_index = argmin(scores.bic);

  auto softmax_half = [](const Vector& v) {
    Vector shifted = (-(v.array() - v.minCoeff()) / 2.0).exp();
    return Vector(shifted / shifted.sum());
  };
  scores.saic = softmax_half(scores.aic);
  scores.sbic = softmax_half(scores.bic);
  return scores;
}

Vector averaged_predict(const std::vector<FittedCandidate>& fits,
                        const std::vector<CandidateSpec>& specs,
                        const Vector& weights, const Matrix& new_scalars,
                        const Matrix& new_transformed_scores) {
  if (fits.size() != specs.size() ||
      static_cast<Index>(fits.size()) != weights.size())
    throw std::invalid_argument("fits, specs and weights must align");
  const Index n =
      std::max(new_scalars.rows(), new_transformed_scores.rows());
  Vector out = Vector::Zero(n);
  for (Index m = 0; m < weights.size(); ++m) {
    if (weights[m] < 1e-8) continue;
    out += weights[m] * predict(fits[m], specs[m], new_scalars,
                                new_transformed_scores);
  }
  return out;
}

}  // namespace plfam
