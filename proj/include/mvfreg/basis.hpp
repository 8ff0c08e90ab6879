#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace mvfreg {

/// Clamped B-spline system on [0, 1] together with the two Gram matrices that
/// discretize every function-space inner product in the library:
///   gram(i, j)      = integral of B_i(t) B_j(t)
///   roughness(i, j) = integral of B_i''(t) B_j''(t)
/// Both are computed per knot span with Gauss-Legendre rules that are exact
/// for the polynomial degree involved, so they do not depend on any
/// observation grid.
struct BasisSpec {
  int degree = 3;
  int dim = 30;
  std::vector<double> knots;  // dim + degree + 1 entries, (degree+1)-fold at 0 and 1
  Eigen::MatrixXd gram;
  Eigen::MatrixXd roughness;
};

/// Equally spaced interior knots. Throws InvalidArgument if dim < degree + 1.
BasisSpec make_basis(int dim, int degree = 3);

/// Rebuilds a spec from an explicit clamped knot vector (used when loading
/// a serialized model).
BasisSpec make_basis_from_knots(int degree, std::vector<double> knots);

/// T x dim matrix of B_d(grid_i), or of its `derivative`-th derivative
/// (0, 1 or 2). Grid points must lie in [0, 1].
Eigen::MatrixXd eval_basis(const BasisSpec& spec, std::span<const double> grid, int derivative = 0);

/// Composite trapezoid weights for a strictly increasing grid.
Eigen::VectorXd trapezoid_weights(std::span<const double> grid);

/// T x dim matrix whose (i, d) entry is w_i B_d(grid_i), w the trapezoid
/// weights. Row vector x^T times this matrix gives curve_scores(x).
Eigen::MatrixXd quadrature_matrix(const BasisSpec& spec, std::span<const double> grid);

/// d-th entry approximates the integral of x(t) B_d(t) by the trapezoid rule
/// on the observation grid.
Eigen::VectorXd curve_scores(const BasisSpec& spec, std::span<const double> curve,
                             std::span<const double> grid);

/// Greville abscissae (knot averages); collocation points for interpolate().
std::vector<double> greville_points(const BasisSpec& spec);

/// Coefficients of the spline interpolating f at the Greville abscissae.
/// Reproduces polynomials up to degree `spec.degree` exactly.
Eigen::VectorXd interpolate(const BasisSpec& spec, const std::function<double(double)>& f);

/// Value of the spline with coefficients `coef` at t.
double eval_spline(const BasisSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& coef, double t);

/// G + eta * H, the matrix of the squared norm ||f||^2 + eta ||f''||^2.
Eigen::MatrixXd penalty_metric(const BasisSpec& spec, double eta);

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace mvfreg
