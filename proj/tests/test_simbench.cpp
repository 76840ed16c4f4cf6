#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "plfam/averaging.hpp"
#include "plfam/fpca.hpp"
#include "plfam/rng.hpp"
#include "plfam/simbench.hpp"
#include "plfam/util.hpp"

using namespace plfam;

namespace {

// quadrature reconstruction of the generating scores from noiseless curves,
// independent of the generator internals
Matrix recover_scores(const GeneratedSplit& split, int design, int k_max) {
  const Vector w = trapezoid_weights(split.curves.grid);
  const Vector& grid = split.curves.grid;
  Matrix psi(grid.size(), k_max);
  for (int k = 1; k <= k_max; ++k)
    for (Index j = 0; j < grid.size(); ++j)
      psi(j, k - 1) = design == 2
                          ? std::cos(k * M_PI * grid[j] / 5.0) / std::sqrt(5.0)
                          : std::sqrt(2.0) * std::sin(k * M_PI * grid[j]);
  return split.curves.values * w.asDiagonal() * psi;
}

double sample_var(const Vector& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("config validation rejects out-of-range fields") {
  DesignConfig c;
  c.design = 4;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.design = 1;
  c.r2 = 1.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.r2 = 0.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.r2 = 0.5;
  c.n_train = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.n_train = 10;
  c.grid_size = 1;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.grid_size = 100;
  c.replications = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.replications = 1;
  validate(c);
}

TEST_CASE("design constants match their closed forms") {
  CHECK(true_eigenvalue(1, 1) == doctest::Approx(1.0));
  CHECK(true_eigenvalue(1, 4) == doctest::Approx(0.125));
  CHECK(true_eigenvalue(2, 1) == doctest::Approx(1.0));
  CHECK(true_eigenvalue(2, 5) == doctest::Approx(0.04));
  CHECK(true_eigenvalue(3, 1) == doctest::Approx(1.0));
  CHECK(true_eigenvalue(3, 8) == doctest::Approx(std::pow(8.0, -1.5)));
  CHECK(scalar_coefficient(1, 4) == doctest::Approx(0.125));
  CHECK(scalar_coefficient(2, 4) == doctest::Approx(0.5));
  CHECK(scalar_coefficient(3, 4) == doctest::Approx(0.25));
  CHECK(score_count(1) == 50);
  CHECK(score_count(2) == 20);
  CHECK(score_count(3) == 50);
  CHECK(variance_multiplier_mean(1) == doctest::Approx(1.0));
  CHECK(variance_multiplier_mean(2) == doctest::Approx(1.0 / 3.0 + 0.01));
  CHECK(variance_multiplier_mean(3) == doctest::Approx(1.01));
  CHECK_THROWS_AS(true_eigenvalue(1, 51), std::invalid_argument);
  CHECK_THROWS_AS(true_eigenvalue(2, 21), std::invalid_argument);
  CHECK_THROWS_AS(scalar_coefficient(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(additive_component(1, 0, 0.5), std::invalid_argument);
}

TEST_CASE("additive components are mean zero over uniform scores") {
  // each f_k is centered so that E f_k(xi) = 0 for xi ~ U(0,1)
  Rng rng(2024);
  const Index draws = 1000000;
  for (int design : {1, 2}) {
    for (int k : {1, 2, 3, 7}) {
      double sum = 0.0, sumsq = 0.0;
      Rng local(rng.next_u64());
      for (Index i = 0; i < draws; ++i) {
        const double f = additive_component(design, k, local.uniform());
        sum += f;
        sumsq += f * f;
      }
      const double mean = sum / draws;
      const double var = sumsq / draws - mean * mean;
      const double stderr3 = 3.0 * std::sqrt(var / draws);
      INFO("design ", design, " component ", k);
      CHECK(std::abs(mean) < stderr3);
    }
  }
}

TEST_CASE("heteroscedastic multiplier matches the uniform second moment") {
  Rng rng(77);
  const Index n = 10000;
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform(-1.0, 1.0);
    acc += u * u + 0.01;
  }
  const double mean = acc / n;
  CHECK(std::abs(mean - variance_multiplier_mean(2)) <
        0.05 * variance_multiplier_mean(2));
}

TEST_CASE("generated score variances match the specified eigenvalues") {
  DesignConfig c;
  c.design = 1;
  c.n_train = 2000;
  c.n_test = 2;
  c.seed = 314;
  GeneratedData data = generate_design(c);
  Matrix zeta = recover_scores(data.train, 1, 4);
  CHECK(sample_var(zeta.col(0)) == doctest::Approx(1.0).epsilon(0.10));
  CHECK(sample_var(zeta.col(3)) == doctest::Approx(0.125).epsilon(0.10));
}

TEST_CASE("correlated designs tie the first score to the scalar block") {
  DesignConfig c;
  c.design = 2;
  c.n_train = 4000;
  c.n_test = 2;
  c.noise_var = 0.0;
  c.seed = 99;
  GeneratedData data = generate_design(c);
  Matrix zeta = recover_scores(data.train, 2, 2);
  CHECK(sample_var(zeta.col(0)) == doctest::Approx(1.0).epsilon(0.10));
  CHECK(sample_var(zeta.col(1)) == doctest::Approx(0.25).epsilon(0.10));

  // adjacent Toeplitz correlation between X_50 and the first score
  Vector x50 = data.train.scalars.col(49);
  Vector z1 = zeta.col(0);
  const double corr =
      ((x50.array() - x50.mean()) * (z1.array() - z1.mean())).sum() /
      std::sqrt((x50.array() - x50.mean()).square().sum() *
                (z1.array() - z1.mean()).square().sum());
  CHECK(corr == doctest::Approx(0.5).epsilon(0.15));

  // Design 1 draws the scores independently of the scalars
  DesignConfig c1 = c;
  c1.design = 1;
  GeneratedData ind = generate_design(c1);
  Matrix zeta1 = recover_scores(ind.train, 1, 1);
  Vector x50i = ind.train.scalars.col(49);
  Vector z1i = zeta1.col(0);
  const double corr1 =
      ((x50i.array() - x50i.mean()) * (z1i.array() - z1i.mean())).sum() /
      std::sqrt((x50i.array() - x50i.mean()).square().sum() *
                (z1i.array() - z1i.mean()).square().sum());
  CHECK(std::abs(corr1) < 0.08);
}

TEST_CASE("fpca on large noiseless samples recovers the leading eigenvalues") {
  DesignConfig c;
  c.design = 1;
  c.n_train = 2000;
  c.n_test = 2;
  c.noise_var = 0.0;
  c.seed = 2718;
  GeneratedData data = generate_design(c);
  FpcaFit fit = fit_fpca(data.train.curves, 3);
  for (int k = 1; k <= 3; ++k) {
    INFO("component ", k);
    CHECK(fit.eigenvalues[k - 1] ==
          doctest::Approx(true_eigenvalue(1, k)).epsilon(0.15));
  }
}

TEST_CASE("noise calibration identities") {
  DesignConfig c;
  c.design = 1;
  c.r2 = 0.5;
  // R2 = 1/2 with unit multiplier collapses to eta^2 = var(mu)
  CHECK(calibrate_noise(c, 2.0) == doctest::Approx(std::sqrt(2.0)));
  c.r2 = 0.9;
  CHECK(calibrate_noise(c, 2.0) == doctest::Approx(std::sqrt(2.0 / 9.0)));
  c.design = 2;
  CHECK(calibrate_noise(c, 2.0) ==
        doctest::Approx(std::sqrt(2.0 / 9.0 / (1.0 / 3.0 + 0.01))));
  c.r2 = 0.0;
  CHECK_THROWS_AS(calibrate_noise(c, 2.0), std::invalid_argument);
  c.r2 = 0.5;
  CHECK_THROWS_AS(calibrate_noise(c, 0.0), std::invalid_argument);
}

TEST_CASE("realized signal share stays near the target R2") {
  for (int design : {1, 2, 3}) {
    for (double r2 : {0.3, 0.7}) {
      DesignConfig c;
      c.design = design;
      c.n_train = 100000;
      c.n_test = 2;
      c.grid_size = 2;  // curves are irrelevant for the variance ratio
      c.r2 = r2;
      c.seed = 11 + design;
      GeneratedData data = generate_design(c);
      const double ratio = sample_var(data.train.true_mean) /
                           sample_var(data.train.response);
      INFO("design ", design, " R2 ", r2);
      CHECK(std::abs(ratio - r2) < 0.02);
    }
  }
}

TEST_CASE("generation is deterministic in the seed") {
  DesignConfig c;
  c.design = 3;
  c.n_train = 20;
  c.n_test = 5;
  c.seed = 5150;
  GeneratedData a = generate_design(c);
  GeneratedData b = generate_design(c);
  CHECK(a.train.response == b.train.response);
  CHECK(a.test.curves.values == b.test.curves.values);
  CHECK(a.train.scalars == b.train.scalars);
  c.seed = 5151;
  GeneratedData d = generate_design(c);
  CHECK(a.train.response != d.train.response);
}

TEST_CASE("aic-only runs self-normalize to one") {
  DesignConfig c;
  c.design = 1;
  c.n_train = 40;
  c.n_test = 30;
  c.r2 = 0.5;
  c.seed = 400;
  c.replications = 3;
  PipelineConfig pc;
  pc.scalar_pool = {0, 1, 2};
  pc.score_pool = {0, 1};
  ReplicationReport rep = run_replications(c, pc, {Method::Aic});
  CHECK(rep.nmspe.size() == 1);
  CHECK(rep.nmspe[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.nmse[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.failed_replications.empty());
}

TEST_CASE("summary values recompute from the raw replication table") {
  DesignConfig c;
  c.design = 2;
  c.n_train = 50;
  c.n_test = 40;
  c.r2 = 0.4;
  c.seed = 900;
  c.replications = 4;
  PipelineConfig pc;
  pc.scalar_pool = {0, 1};
  pc.score_pool = {0, 1};
  std::vector<Method> methods = {Method::Aic, Method::Bic, Method::Cvma};
  ReplicationReport rep = run_replications(c, pc, methods);

  const double aic_mean = rep.mspe.col(0).mean();
  for (Index j = 0; j < 3; ++j) {
    const double manual = rep.mspe.col(j).mean() / aic_mean;
    CHECK(rep.nmspe[j] == doctest::Approx(manual).epsilon(1e-12));
  }
  const double aic_mse_mean = rep.mse.col(0).mean();
  for (Index j = 0; j < 3; ++j) {
    const double manual = rep.mse.col(j).mean() / aic_mse_mean;
    CHECK(rep.nmse[j] == doctest::Approx(manual).epsilon(1e-12));
  }
  for (Index j = 0; j < 3; ++j) {
    CHECK(rep.nmspe[j] > 0.0);
    CHECK(rep.nmse[j] > 0.0);
  }
}

TEST_CASE("csv reports are byte-identical across runs and thread counts") {
  DesignConfig c;
  c.design = 1;
  c.n_train = 30;
  c.n_test = 20;
  c.r2 = 0.6;
  c.seed = 777;
  c.replications = 4;
  PipelineConfig pc;
  pc.scalar_pool = {0, 1};
  pc.score_pool = {0};
  std::vector<Method> methods = {Method::Aic, Method::Cvma};

  setenv("PLFAM_THREADS", "1", 1);
  ReplicationReport serial = run_replications(c, pc, methods);
  setenv("PLFAM_THREADS", "7", 1);
  ReplicationReport threaded = run_replications(c, pc, methods);
  unsetenv("PLFAM_THREADS");

  CHECK(raw_csv({serial}) == raw_csv({threaded}));
  CHECK(summary_csv({serial}) == summary_csv({threaded}));
  CHECK(nmspe_table({serial}) == nmspe_table({threaded}));
  CHECK(raw_csv({serial}).rfind("design,R2,n,method,replication,mspe,mse\n",
                                0) == 0);
  CHECK(summary_csv({serial}).rfind("design,R2,n,method,nmspe,nmse\n", 0) ==
        0);
}

TEST_CASE("averaged cv criterion never exceeds the best single candidate") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    DesignConfig c;
    c.design = 1;
    c.n_train = 60;
    c.n_test = 2;
    c.r2 = 0.5;
    c.seed = seed;
    GeneratedData data = generate_design(c);
    PipelineConfig pc;
    pc.scalar_pool = {0, 1, 2, 3, 4};
    pc.score_pool = {0, 1, 2};
    pc.seed = seed;
    AveragedFit fit = fit_averaging(data.train.scalars, data.train.curves,
                                    data.train.response, pc);
    std::vector<double> taus;
    for (const auto& f : fit.fits) taus.push_back(f.smoothing_tau);
    CvPredictionMatrix cv = cv_prediction_matrix(
        fit.specs, data.train.scalars, fit.fpca.transformed_scores,
        data.train.response, taus, fit.plan);
    Matrix e = cv_quadratic_form(cv.matrix, data.train.response);
    CHECK(fit.cv_weights.objective <= e.diagonal().minCoeff() + 1e-8);
  }
}

TEST_CASE("cross-validation averaging beats aic selection at desk scale") {
  DesignConfig c;
  c.design = 1;
  c.n_train = 100;
  c.n_test = 500;
  c.r2 = 0.5;
  c.seed = 60000;
  c.replications = 50;
  PipelineConfig pc;
  pc.scalar_pool = {0, 1, 2, 3, 4};
  pc.score_pool = {0, 1, 2};
  std::vector<Method> methods = {Method::Aic, Method::Cvma};
  ReplicationReport rep = run_replications(c, pc, methods);
  CHECK(rep.failed_replications.empty());
  CHECK(rep.nmspe[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.nmspe[1] < 1.0);
}

TEST_CASE("table rendering shows methods by R2 level") {
  DesignConfig c;
  c.design = 1;
  c.n_train = 30;
  c.n_test = 20;
  c.seed = 808;
  c.replications = 2;
  PipelineConfig pc;
  pc.scalar_pool = {0};
  pc.score_pool = {0};
  std::vector<ReplicationReport> reports;
  for (double r2 : {0.3, 0.6}) {
    DesignConfig ci = c;
    ci.r2 = r2;
    reports.push_back(run_replications(ci, pc, {Method::Aic, Method::Saic}));
  }
  std::string table = nmspe_table(reports);
  CHECK(table.find("NMSPE design 1, n=30, D=2") != std::string::npos);
  CHECK(table.find("R2=0.3") != std::string::npos);
  CHECK(table.find("R2=0.6") != std::string::npos);
  CHECK(table.find("aic") != std::string::npos);
  CHECK(table.find("saic") != std::string::npos);
  CHECK(table.find("1.0000") != std::string::npos);

  // single method, single level still renders a 1x1 block
  std::string small = nmspe_table({reports[0]});
  CHECK(small.find("aic") != std::string::npos);
}
