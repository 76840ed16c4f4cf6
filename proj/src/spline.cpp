#include "plfam/spline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace plfam {

SplineBasis make_basis(Index n_interior, int order) {
  if (order < 2) throw std::invalid_argument("spline order must be >= 2");
  if (n_interior < 0) throw std::invalid_argument("n_interior must be >= 0");
  SplineBasis b;
  b.order = order;
  b.n_basis = n_interior + order;
  b.interior_knots.resize(n_interior);
  for (Index i = 0; i < n_interior; ++i)
    b.interior_knots[i] = static_cast<double>(i + 1) / static_cast<double>(n_interior + 1);
  b.knots.resize(b.n_basis + order);
  for (int i = 0; i < order; ++i) b.knots[i] = 0.0;
  for (Index i = 0; i < n_interior; ++i) b.knots[order + i] = b.interior_knots[i];
  for (int i = 0; i < order; ++i) b.knots[order + n_interior + i] = 1.0;
  return b;
}

Index default_interior_knots(Index n) {
  auto j = static_cast<Index>(std::floor(std::pow(static_cast<double>(n), 0.25)));
  return std::clamp<Index>(j, 2, 10);
}

namespace {

// Index of the knot span containing x: largest i with knots[i] <= x,
// restricted to spans of positive length (x == 1 maps into the last one).
Index find_span(const SplineBasis& b, double x) {
  const Index degree = b.order - 1;
  const Index last = b.n_basis - 1;  // last valid span start
  if (x >= b.knots[b.n_basis]) return last;
  if (x <= b.knots[degree]) return degree;
  Index lo = degree, hi = b.n_basis;
  while (hi - lo > 1) {
    Index mid = (lo + hi) / 2;
    if (x < b.knots[mid])
      hi = mid;
    else
      lo = mid;
  }
  return lo;
}

// Cox-de Boor triangle: values of the order nonzero basis functions
// B_{span-degree..span} at x.
void basis_funs(const SplineBasis& b, Index span, double x, double* out) {
  const int p = b.order - 1;
  std::vector<double> left(p + 1), right(p + 1);
  out[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - b.knots[span + 1 - j];
    right[j] = b.knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

double clamp01(double x, Index* clamped) {
  if (x < 0.0 || x > 1.0) {
    if (clamped) ++*clamped;
    return std::clamp(x, 0.0, 1.0);
  }
  return x;
}

}  // namespace

Vector eval_basis(const SplineBasis& basis, double x, Index* clamped) {
  x = clamp01(x, clamped);
  Vector out = Vector::Zero(basis.n_basis);
  Index span = find_span(basis, x);
  std::vector<double> local(basis.order);
  basis_funs(basis, span, x, local.data());
  for (int r = 0; r < basis.order; ++r)
    out[span - basis.order + 1 + r] = local[r];
  return out;
}

Matrix eval_basis_matrix(const SplineBasis& basis, const Vector& xs, Index* clamped) {
  Matrix out = Matrix::Zero(xs.size(), basis.n_basis);
  std::vector<double> local(basis.order);
  for (Index i = 0; i < xs.size(); ++i) {
    double x = clamp01(xs[i], clamped);
    Index span = find_span(basis, x);
    basis_funs(basis, span, x, local.data());
    for (int r = 0; r < basis.order; ++r)
      out(i, span - basis.order + 1 + r) = local[r];
  }
  return out;
}

Matrix eval_basis_derivatives(const SplineBasis& basis, double x, int nderiv) {
  x = clamp01(x, nullptr);
  const int p = basis.order - 1;
  const int n = std::min(nderiv, p);
  Index span = find_span(basis, x);

  // Standard derivative algorithm over the knot-difference triangle.
  Matrix ndu(p + 1, p + 1);
  std::vector<double> left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - basis.knots[span + 1 - j];
    right[j] = basis.knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }

  Matrix ders = Matrix::Zero(nderiv + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

  Matrix a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      int rk = r - k, pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      int j1 = (rk >= -1) ? 1 : -rk;
      int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j <= p; ++j) ders(k, j) *= factor;
    factor *= (p - k);
  }

  Matrix out = Matrix::Zero(nderiv + 1, basis.n_basis);
  for (int k = 0; k <= nderiv; ++k)
    for (int r = 0; r <= p; ++r)
      out(k, span - p + r) = ders(k, r);
  return out;
}

std::pair<Vector, Vector> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre needs n >= 1");
  if (n == 1) return {Vector::Zero(1), Vector::Constant(1, 2.0)};
  // Golub-Welsch: eigen-decomposition of the Jacobi matrix.
  Matrix jacobi = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double b = i / std::sqrt(4.0 * i * i - 1.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  if (es.info() != Eigen::Success)
    throw NumericError("gauss_legendre: eigen-solver failed");
  Vector nodes = es.eigenvalues();
  Vector weights(n);
  for (int i = 0; i < n; ++i) {
    double v0 = es.eigenvectors()(0, i);
    weights[i] = 2.0 * v0 * v0;
  }
  return {nodes, weights};
}

Matrix penalty_matrix(const SplineBasis& basis) {
  const Index nb = basis.n_basis;
  if (basis.order == 2) return Matrix::Zero(nb, nb);
  if (basis.order < 2) throw std::invalid_argument("penalty_matrix: order must be >= 2");

  auto [nodes, weights] = gauss_legendre(basis.order - 2);
  Matrix s = Matrix::Zero(nb, nb);
  for (Index i = basis.order - 1; i < nb; ++i) {
    double u0 = basis.knots[i], u1 = basis.knots[i + 1];
    if (u1 <= u0) continue;
    double mid = 0.5 * (u0 + u1), half = 0.5 * (u1 - u0);
    for (Index g = 0; g < nodes.size(); ++g) {
      double x = mid + half * nodes[g];
      Vector d2 = eval_basis_derivatives(basis, x, 2).row(2);
      s.noalias() += (half * weights[g]) * d2 * d2.transpose();
    }
  }
  return 0.5 * (s + s.transpose());
}

}  // namespace plfam
