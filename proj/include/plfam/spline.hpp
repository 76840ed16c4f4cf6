#pragma once

#include <utility>

#include "plfam/types.hpp"

namespace plfam {

// Clamped B-spline basis on [0, 1]. `order` is the polynomial order
// (degree + 1); order 4 is the cubic default. The knot vector carries
// order-fold multiplicity at both boundaries, so n_basis =
// interior_knots.size() + order.
struct SplineBasis {
  int order = 4;
  Vector interior_knots;
  Vector knots;  // full clamped knot vector, size n_basis + order
  Index n_basis = 0;
};

// Basis with `n_interior` equally spaced interior knots at i/(n_interior+1).
SplineBasis make_basis(Index n_interior, int order = 4);

// Default interior-knot count for a training sample of size n:
// floor(n^(1/4)) clamped to [2, 10].
Index default_interior_knots(Index n);

// All n_basis basis values at x. x outside [0,1] is clamped to the boundary;
// if clamped is non-null it is incremented when that happens.
Vector eval_basis(const SplineBasis& basis, double x, Index* clamped = nullptr);

// Rows = evaluation points, columns = basis functions.
Matrix eval_basis_matrix(const SplineBasis& basis, const Vector& xs,
                         Index* clamped = nullptr);

// Basis derivatives at x: row d of the result holds the d-th derivatives,
// d = 0..nderiv.
Matrix eval_basis_derivatives(const SplineBasis& basis, double x, int nderiv);

// Roughness penalty S with S(j1,j2) = \int_0^1 b''_{j1} b''_{j2}. Second
// derivatives are piecewise polynomials of degree order-3, so the integral is
// evaluated exactly with (order-2)-point Gauss-Legendre per knot span.
// For order 2 the matrix is zero.
Matrix penalty_matrix(const SplineBasis& basis);

// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
std::pair<Vector, Vector> gauss_legendre(int n);

}  // namespace plfam
