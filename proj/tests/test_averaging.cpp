#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "plfam/averaging.hpp"
#include "plfam/rng.hpp"

using namespace plfam;

namespace {

Matrix random_matrix(Rng& rng, Index r, Index c) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

Matrix random_psd(Rng& rng, Index m) {
  Matrix a = random_matrix(rng, m + 2, m);
  Matrix e = Matrix::Zero(m, m);
  e.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  e.triangularView<Eigen::StrictlyUpper>() =
      e.transpose().triangularView<Eigen::StrictlyUpper>();
  return e;
}

FittedCandidate stub_fit(double sigma2, double edf) {
  FittedCandidate f;
  f.sigma2_hat = sigma2;
  f.edf = edf;
  return f;
}

}  // namespace

TEST_CASE("candidate enumeration counts match the nested and subset rules") {
  SplineBasis basis = make_basis(0, 4);
  auto nested =
      enumerate_candidates(CandidateMode::Nested, {0, 1, 2, 3, 4}, {0, 1, 2},
                           basis);
  CHECK(nested.size() == 15);

  auto non_nested = enumerate_candidates(CandidateMode::NonNested, {0, 1, 2},
                                         {0, 1, 2}, basis);
  CHECK(non_nested.size() == 49);

  auto single =
      enumerate_candidates(CandidateMode::Nested, {0}, {0}, basis);
  CHECK(single.size() == 1);
  CHECK(single[0].scalar_columns == std::vector<Index>{0});
  CHECK(single[0].score_columns == std::vector<Index>{0});

  CHECK_THROWS_AS(
      enumerate_candidates(CandidateMode::Nested, {}, {0}, basis), DataError);
}

TEST_CASE("nested enumeration is prefix pairs in lexicographic order") {
  SplineBasis basis = make_basis(0, 4);
  auto specs =
      enumerate_candidates(CandidateMode::Nested, {3, 7}, {0, 1}, basis);
  REQUIRE(specs.size() == 4);
  CHECK(specs[0].scalar_columns == std::vector<Index>{3});
  CHECK(specs[0].score_columns == std::vector<Index>{0});
  CHECK(specs[1].scalar_columns == std::vector<Index>{3});
  CHECK(specs[1].score_columns == std::vector<Index>{0, 1});
  CHECK(specs[2].scalar_columns == std::vector<Index>{3, 7});
  CHECK(specs[2].score_columns == std::vector<Index>{0});
  CHECK(specs[3].scalar_columns == std::vector<Index>{3, 7});
  CHECK(specs[3].score_columns == std::vector<Index>{0, 1});
}

TEST_CASE("subset enumeration is lexicographic in the index vectors") {
  SplineBasis basis = make_basis(0, 4);
  auto specs =
      enumerate_candidates(CandidateMode::NonNested, {0, 1, 2}, {5}, basis);
  REQUIRE(specs.size() == 7);
  using V = std::vector<Index>;
  CHECK(specs[0].scalar_columns == V{0});
  CHECK(specs[1].scalar_columns == V{0, 1});
  CHECK(specs[2].scalar_columns == V{0, 1, 2});
  CHECK(specs[3].scalar_columns == V{0, 2});
  CHECK(specs[4].scalar_columns == V{1});
  CHECK(specs[5].scalar_columns == V{1, 2});
  CHECK(specs[6].scalar_columns == V{2});
  for (const auto& s : specs) CHECK(s.score_columns == V{5});
}

TEST_CASE("fold plans deal a seeded permutation round-robin") {
  FoldPlan even = make_fold_plan(10, 5, 42);
  CHECK(even.fold_sizes == std::vector<Index>{2, 2, 2, 2, 2});

  FoldPlan uneven = make_fold_plan(11, 5, 42);
  CHECK(uneven.fold_sizes == std::vector<Index>{3, 2, 2, 2, 2});

  FoldPlan loo = make_fold_plan(7, 7, 1);
  CHECK(loo.fold_sizes == std::vector<Index>(7, 1));

  // every observation lands in exactly one fold with a valid id
  FoldPlan plan = make_fold_plan(103, 5, 9);
  std::vector<Index> counts(5, 0);
  for (int f : plan.assignment) {
    REQUIRE(f >= 1);
    REQUIRE(f <= 5);
    ++counts[f - 1];
  }
  CHECK(counts == plan.fold_sizes);
  for (Index s : plan.fold_sizes) CHECK(std::abs(s - 103 / 5) <= 1);

  // deterministic in the seed
  FoldPlan again = make_fold_plan(103, 5, 9);
  CHECK(again.assignment == plan.assignment);

  CHECK_THROWS_AS(make_fold_plan(10, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_fold_plan(10, 11, 0), std::invalid_argument);
}

TEST_CASE("leave-one-out predictions match the hat-matrix identity") {
  SplineBasis basis = make_basis(0, 4);
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(500 + inst);
    const Index n = 12;
    Matrix scalars = random_matrix(rng, n, 2);
    Matrix xi(n, 0);
    Vector y = random_matrix(rng, n, 1).col(0);
    CandidateSpec spec = make_candidate({0, 1}, {}, basis);

    FoldPlan plan = make_fold_plan(n, n, 77);
    CvPredictionMatrix cv = cv_prediction_matrix(
        {spec}, scalars, xi, y, {0.0}, plan);

    Design d = assemble_design(spec, scalars, xi);
    Matrix hat = d.matrix *
                 (d.matrix.transpose() * d.matrix)
                     .ldlt()
                     .solve(d.matrix.transpose());
    Vector fitted = hat * y;
    for (Index i = 0; i < n; ++i) {
      const double loo = y[i] - (y[i] - fitted[i]) / (1.0 - hat(i, i));
      CHECK(cv.matrix(i, 0) == doctest::Approx(loo).epsilon(1e-8));
    }
  }
}

TEST_CASE("duplicate candidates give identical prediction columns") {
  Rng rng(31);
  SplineBasis basis = make_basis(1, 4);
  const Index n = 30;
  Matrix scalars = random_matrix(rng, n, 2);
  Matrix xi(n, 1);
  for (Index i = 0; i < n; ++i) xi(i, 0) = rng.uniform();
  Vector y = random_matrix(rng, n, 1).col(0);
  CandidateSpec spec = make_candidate({0}, {0}, basis);

  FoldPlan plan = make_fold_plan(n, 5, 3);
  CvPredictionMatrix cv = cv_prediction_matrix({spec, spec}, scalars, xi, y,
                                               {0.1, 0.1}, plan);
  CHECK((cv.matrix.col(0) - cv.matrix.col(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant responses are reproduced out of fold") {
  Rng rng(8);
  SplineBasis basis = make_basis(1, 4);
  const Index n = 25;
  Matrix scalars(n, 0);
  Matrix xi(n, 1);
  for (Index i = 0; i < n; ++i) xi(i, 0) = rng.uniform();
  Vector y = Vector::Constant(n, 3.25);
  CandidateSpec spec = make_candidate({}, {0}, basis, true);

  FoldPlan plan = make_fold_plan(n, 5, 12);
  CvPredictionMatrix cv =
      cv_prediction_matrix({spec}, scalars, xi, y, {1e4}, plan);
  CHECK((cv.matrix.array() - 3.25).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("quadratic form matches the direct double sum") {
  Rng rng(64);
  const Index n = 40, m = 5;
  Matrix preds = random_matrix(rng, n, m);
  Vector y = random_matrix(rng, n, 1).col(0);
  Matrix e = cv_quadratic_form(preds, y);

  CHECK(e.rows() == m);
  CHECK((e - e.transpose()).cwiseAbs().maxCoeff() == 0.0);

  for (int r = 0; r < 20; ++r) {
    Vector w = random_matrix(rng, m, 1).col(0).cwiseAbs();
    w /= w.sum();
    double direct = 0.0;
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Index j = 0; j < m; ++j) acc += w[j] * preds(i, j);
      direct += (acc - y[i]) * (acc - y[i]);
    }
    CHECK(w.dot(e * w) == doctest::Approx(direct).epsilon(1e-8));
  }

  // single candidate reduces to the residual sum of squares
  Matrix e1 = cv_quadratic_form(preds.col(0), y);
  CHECK(e1(0, 0) ==
        doctest::Approx((preds.col(0) - y).squaredNorm()).epsilon(1e-12));

  // duplicated column gives equal rows
  Matrix dup(n, 2);
  dup.col(0) = preds.col(0);
  dup.col(1) = preds.col(0);
  Matrix e2 = cv_quadratic_form(dup, y);
  CHECK((e2.row(0) - e2.row(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simplex projection is exact on known cases") {
  Vector v(3);
  v << 0.5, 0.2, 0.3;  // already on the simplex
  CHECK((project_simplex(v) - v).cwiseAbs().maxCoeff() < 1e-15);

  Vector big(2);
  big << 10.0, 0.0;
  Vector p = project_simplex(big);
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[1] == 0.0);

  Vector sym(2);
  sym << 5.0, 5.0;
  Vector ps = project_simplex(sym);
  CHECK(ps[0] == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(19);
  for (int r = 0; r < 200; ++r) {
    Vector x = random_matrix(rng, 6, 1).col(0) * 3.0;
    Vector w = project_simplex(x);
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // projection optimality: no feasible vertex is closer
    for (Index j = 0; j < 6; ++j) {
      Vector vertex = Vector::Unit(6, j);
      CHECK((x - w).squaredNorm() <= (x - vertex).squaredNorm() + 1e-12);
    }
  }
}

TEST_CASE("weight solver reproduces closed-form optima") {
  Matrix e1(1, 1);
  e1 << 4.2;
  WeightVector w1 = solve_simplex_qp(e1);
  CHECK(w1.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(w1.converged);

  Matrix diag = Matrix::Zero(2, 2);
  diag(0, 0) = 1.0;
  diag(1, 1) = 2.0;
  WeightVector w2 = solve_simplex_qp(diag);
  CHECK(w2.weights[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(w2.weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(w2.objective == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(w2.converged);

  WeightVector w3 = solve_simplex_qp(Matrix::Identity(2, 2));
  CHECK(w3.weights[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(w3.weights[1] == doctest::Approx(0.5).epsilon(1e-9));

  Matrix bad(2, 2);
  bad << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(solve_simplex_qp(bad), std::invalid_argument);

  Matrix indef = Matrix::Identity(2, 2);
  indef(1, 1) = -1.0;
  CHECK_THROWS_AS(solve_simplex_qp(indef), NumericError);
}

TEST_CASE("solver beats the 0.01 grid on random PSD instances") {
  Rng rng(2024);
  for (int inst = 0; inst < 5; ++inst) {
    Matrix e = random_psd(rng, 4);
    WeightVector sol = solve_simplex_qp(e);
    REQUIRE(sol.converged);

    double best_grid = 1e300;
    const int steps = 100;
    for (int a = 0; a <= steps; ++a)
      for (int b = 0; a + b <= steps; ++b)
        for (int c = 0; a + b + c <= steps; ++c) {
          Vector w(4);
          w << a, b, c, steps - a - b - c;
          w /= static_cast<double>(steps);
          best_grid = std::min(best_grid, w.dot(e * w));
        }
    CHECK(sol.objective <= best_grid + 1e-4);
  }
}

TEST_CASE("weights stay feasible on 1000 random instances") {
  Rng rng(77001);
  for (int inst = 0; inst < 1000; ++inst) {
    const Index m = 2 + static_cast<Index>(rng.bounded(9));
    Matrix e = random_psd(rng, m);
    WeightVector sol = solve_simplex_qp(e);
    CHECK(sol.weights.minCoeff() >= 0.0);
    CHECK(std::abs(sol.weights.sum() - 1.0) <= 1e-10);
    // optimality against all vertices
    for (Index j = 0; j < m; ++j)
      CHECK(sol.objective <= e(j, j) + 1e-6 * std::max(1.0, e(j, j)));
  }
}

TEST_CASE("criterion formulas reproduce worked examples") {
  std::vector<FittedCandidate> fits = {stub_fit(1.0, 5.0)};
  CriterionScores s = criterion_scores(fits, 100);
  CHECK(s.aic[0] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(s.bic[0] == doctest::Approx(5.0 * std::log(100.0)).epsilon(1e-12));
  CHECK(s.bic[0] == doctest::Approx(23.0258509299).epsilon(1e-9));

  // two candidates with AIC scores 0 and 2
  std::vector<FittedCandidate> two = {stub_fit(1.0, 0.0), stub_fit(1.0, 1.0)};
  CriterionScores s2 = criterion_scores(two, 100);
  CHECK(s2.aic[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(s2.aic[1] == doctest::Approx(2.0).epsilon(1e-12));
  const double w0 = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(s2.saic[0] == doctest::Approx(w0).epsilon(1e-6));
  CHECK(s2.saic[1] == doctest::Approx(1.0 - w0).epsilon(1e-6));
  CHECK(s2.saic[0] == doctest::Approx(0.73106).epsilon(1e-4));
  CHECK(s2.aic_index == 0);

  CHECK_THROWS_AS(criterion_scores({stub_fit(0.0, 1.0)}, 10), NumericError);
}

TEST_CASE("softmax weights are invariant to shifting all scores") {
  Rng rng(91);
  const Index n = 50;
  std::vector<FittedCandidate> base, shifted;
  // multiplying every sigma2 by exp(c/n) adds the constant c to each score
  const double c = 7.3;
  for (int m = 0; m < 6; ++m) {
    const double s2 = 0.5 + rng.uniform();
    const double edf = 1.0 + 4.0 * rng.uniform();
    base.push_back(stub_fit(s2, edf));
    shifted.push_back(stub_fit(s2 * std::exp(c / n), edf));
  }
  CriterionScores a = criterion_scores(base, n);
  CriterionScores b = criterion_scores(shifted, n);
  CHECK((a.saic - b.saic).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.sbic - b.sbic).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.aic_index == b.aic_index);
  CHECK(b.bic_index == b.bic_index);
  CHECK(std::abs(a.saic.sum() - 1.0) < 1e-10);
  CHECK(std::abs(a.sbic.sum() - 1.0) < 1e-10);
  CHECK(a.saic.minCoeff() >= 0.0);
}

TEST_CASE("averaged prediction is the stated convex combination") {
  Rng rng(15);
  SplineBasis basis = make_basis(0, 4);
  const Index n = 20;
  Matrix scalars = random_matrix(rng, n, 2);
  Matrix xi(n, 1);
  for (Index i = 0; i < n; ++i) xi(i, 0) = rng.uniform();
  Vector y = random_matrix(rng, n, 1).col(0);

  std::vector<CandidateSpec> specs = {make_candidate({0}, {}, basis),
                                      make_candidate({0, 1}, {0}, basis)};
  std::vector<FittedCandidate> fits;
  for (const auto& spec : specs) {
    Design d = assemble_design(spec, scalars, xi);
    fits.push_back(fit_penalized(d, penalty_blocks(spec, d.layout), y, 0.3));
  }

  Vector one_hot(2);
  one_hot << 0.0, 1.0;
  Vector p = averaged_predict(fits, specs, one_hot, scalars, xi);
  Vector direct = predict(fits[1], specs[1], scalars, xi);
  CHECK((p - direct).cwiseAbs().maxCoeff() == 0.0);

  Vector mix(2);
  mix << 0.25, 0.75;
  Vector pm = averaged_predict(fits, specs, mix, scalars, xi);
  Vector expect = 0.25 * predict(fits[0], specs[0], scalars, xi) +
                  0.75 * direct;
  CHECK((pm - expect).cwiseAbs().maxCoeff() < 1e-12);

  // below-threshold weights are skipped entirely
  Vector tiny(2);
  tiny << 1e-9, 1.0 - 1e-9;
  Vector pt = averaged_predict(fits, specs, tiny, scalars, xi);
  CHECK((pt - (1.0 - 1e-9) * direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant candidate predictions average to the weighted constant") {
  SplineBasis basis = make_basis(0, 4);
  Matrix scalars(4, 1);
  scalars << 1, 1, 1, 1;
  Matrix xi(4, 0);
  CandidateSpec spec = make_candidate({}, {}, basis);
  Design d = assemble_design(spec, scalars, xi);
  auto blocks = penalty_blocks(spec, d.layout);
  FittedCandidate zero = fit_penalized(d, blocks, Vector::Zero(4), 0.0);
  FittedCandidate one = fit_penalized(d, blocks, Vector::Ones(4), 0.0);
  Vector w(2);
  w << 0.25, 0.75;
  Vector p = averaged_predict({zero, one}, {spec, spec}, w, scalars, xi);
  CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
}
