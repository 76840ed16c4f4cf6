#include "plfam/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

#include "plfam/util.hpp"

namespace plfam {

Method parse_method(const std::string& name) {
  if (name == "aic") return Method::Aic;
  if (name == "bic") return Method::Bic;
  if (name == "saic") return Method::Saic;
  if (name == "sbic") return Method::Sbic;
  if (name == "cvma") return Method::Cvma;
  throw std::invalid_argument("unknown method '" + name +
                              "' (expected aic|bic|saic|sbic|cvma)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::Aic: return "aic";
    case Method::Bic: return "bic";
    case Method::Saic: return "saic";
    case Method::Sbic: return "sbic";
    case Method::Cvma: return "cvma";
  }
  return "?";
}

AveragedFit fit_averaging(const Matrix& scalars,
                          const FunctionalDataset& curves, const Vector& y,
                          const PipelineConfig& config) {
  const Index n = y.size();
  if (scalars.rows() != n || curves.n() != n)
    throw DataError("scalar rows, curve rows and response length must agree");
  if (config.score_pool.empty() || config.scalar_pool.empty())
    throw DataError("candidate pools must be nonempty");

  AveragedFit out;
  out.config = config;

  const Index k = 1 + *std::max_element(config.score_pool.begin(),
                                        config.score_pool.end());
  out.fpca = fit_fpca(curves, k);

  const Index interior = config.n_interior > 0 ? config.n_interior
                                               : default_interior_knots(n);
  out.basis = make_basis(interior, config.spline_order);
  out.specs = enumerate_candidates(config.mode, config.scalar_pool,
                                   config.score_pool, out.basis);

  const Vector grid =
      config.tau_grid.size() > 0 ? config.tau_grid : default_tau_grid();
  const Index m_count = static_cast<Index>(out.specs.size());
  out.fits.resize(m_count);
  std::vector<double> taus(m_count, 0.0);
  parallel_for(m_count, [&](Index m) {
    try {
      Design design =
          assemble_design(out.specs[m], scalars, out.fpca.transformed_scores);
      auto blocks = penalty_blocks(out.specs[m], design.layout);
      SmoothingSelection sel = select_smoothing(design, blocks, y, grid);
      out.fits[m] = fit_penalized(design, blocks, y, sel.tau);
      taus[m] = sel.tau;
    } catch (const NumericError& err) {
      throw NumericError("candidate " + std::to_string(m + 1) + ": " +
                         err.what());
    }
  });

  out.plan = make_fold_plan(n, config.q_folds, config.seed);
  CvPredictionMatrix cv =
      cv_prediction_matrix(out.specs, scalars, out.fpca.transformed_scores, y,
                           taus, out.plan);
  out.cv_weights = solve_simplex_qp(cv_quadratic_form(cv.matrix, y));
  out.criteria = criterion_scores(out.fits, n);
  return out;
}

Vector method_weights(const AveragedFit& fit, Method method) {
  const Index m = static_cast<Index>(fit.fits.size());
  switch (method) {
    case Method::Aic:
      return Vector::Unit(m, fit.criteria.aic_index);
    case Method::Bic:
      return Vector::Unit(m, fit.criteria.bic_index);
    case Method::Saic:
      return fit.criteria.saic;
    case Method::Sbic:
      return fit.criteria.sbic;
    case Method::Cvma:
      return fit.cv_weights.weights;
  }
  throw std::invalid_argument("unknown method");
}

Vector predict_method_scores(const AveragedFit& fit, Method method,
                             const Matrix& new_scalars,
                             const Matrix& new_transformed_scores) {
  return averaged_predict(fit.fits, fit.specs, method_weights(fit, method),
                          new_scalars, new_transformed_scores);
}

Vector predict_method(const AveragedFit& fit, Method method,
                      const Matrix& new_scalars,
                      const FunctionalDataset& new_curves) {
  if (new_scalars.rows() != new_curves.n())
    throw DataError("scalar rows and curve rows must agree");
  const Matrix xi = transform_new_curves(fit.fpca, new_curves);
  return predict_method_scores(fit, method, new_scalars, xi);
}

}  // namespace plfam
