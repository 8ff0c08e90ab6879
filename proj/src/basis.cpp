#include "mvfreg/basis.hpp"

#include "mvfreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace mvfreg {

namespace {

int find_span(const BasisSpec& spec, double t) {
  const int n = spec.dim - 1;
  const auto& u = spec.knots;
  if (t >= u[n + 1]) return n;
  if (t <= u[spec.degree]) return spec.degree;
  // last index with u[i] <= t < u[i+1]
  auto it = std::upper_bound(u.begin() + spec.degree, u.begin() + n + 1, t);
  return static_cast<int>(it - u.begin()) - 1;
}

// Nonzero basis functions and their derivatives at t (de Boor / Cox
// recursion with the derivative triangle). ders(k, r) is the k-th derivative
// of B_{span-degree+r}.
Eigen::MatrixXd basis_ders(const BasisSpec& spec, int span, double t, int nder) {
  const int p = spec.degree;
  const auto& u = spec.knots;
  Eigen::MatrixXd ndu(p + 1, p + 1);
  std::vector<double> left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - u[span + 1 - j];
    right[j] = u[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }
  Eigen::MatrixXd ders = Eigen::MatrixXd::Zero(nder + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);
  Eigen::MatrixXd a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= nder; ++k) {
      double d = 0.0;
      int rk = r - k, pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      int j1 = rk >= -1 ? 1 : -rk;
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
  double fac = p;
  for (int k = 1; k <= nder; ++k) {
    ders.row(k) *= fac;
    fac *= (p - k);
  }
  return ders;
}

void fill_gram_matrices(BasisSpec& spec) {
  const int p = spec.degree;
  const int d = spec.dim;
  std::vector<double> nodes, weights;
  gauss_legendre(p + 1, nodes, weights);
  spec.gram = Eigen::MatrixXd::Zero(d, d);
  spec.roughness = Eigen::MatrixXd::Zero(d, d);
  const int nder = std::min(2, p);
  for (int span = p; span < d; ++span) {
    double a = spec.knots[span], b = spec.knots[span + 1];
    if (b <= a) continue;
    double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      double t = mid + half * nodes[q];
      double w = half * weights[q];
      Eigen::MatrixXd ders = basis_ders(spec, span, t, nder);
      for (int i = 0; i <= p; ++i) {
        for (int j = 0; j <= p; ++j) {
          spec.gram(span - p + i, span - p + j) += w * ders(0, i) * ders(0, j);
          if (nder == 2) spec.roughness(span - p + i, span - p + j) += w * ders(2, i) * ders(2, j);
        }
      }
    }
  }
}

}  // namespace

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

BasisSpec make_basis(int dim, int degree) {
  if (degree < 0) throw InvalidArgument("make_basis: degree must be nonnegative");
  if (dim < degree + 1) {
    throw InvalidArgument("make_basis: dim " + std::to_string(dim) + " must be at least degree + 1 = " +
                          std::to_string(degree + 1));
  }
  std::vector<double> knots;
  knots.reserve(dim + degree + 1);
  for (int i = 0; i <= degree; ++i) knots.push_back(0.0);
  const int spans = dim - degree;
  for (int i = 1; i < spans; ++i) knots.push_back(static_cast<double>(i) / spans);
  for (int i = 0; i <= degree; ++i) knots.push_back(1.0);
  return make_basis_from_knots(degree, std::move(knots));
}

BasisSpec make_basis_from_knots(int degree, std::vector<double> knots) {
  if (degree < 0) throw InvalidArgument("basis: degree must be nonnegative");
  const int dim = static_cast<int>(knots.size()) - degree - 1;
  if (dim < degree + 1) throw InvalidArgument("basis: knot vector too short for the degree");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (knots[i] < knots[i - 1]) throw InvalidArgument("basis: knots must be nondecreasing");
  }
  for (int i = 0; i <= degree; ++i) {
    if (knots[i] != 0.0 || knots[knots.size() - 1 - i] != 1.0) {
      throw InvalidArgument("basis: knots must be clamped at 0 and 1");
    }
  }
  BasisSpec spec;
  spec.degree = degree;
  spec.dim = dim;
  spec.knots = std::move(knots);
  fill_gram_matrices(spec);
  return spec;
}

Eigen::MatrixXd eval_basis(const BasisSpec& spec, std::span<const double> grid, int derivative) {
  if (derivative < 0 || derivative > 2) throw InvalidArgument("eval_basis: derivative must be 0, 1 or 2");
  const int p = spec.degree;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), spec.dim);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double t = grid[i];
    if (!(t >= 0.0 && t <= 1.0)) {
      throw InvalidArgument("eval_basis: grid point " + std::to_string(t) + " outside [0, 1]");
    }
    int span = find_span(spec, t);
    if (derivative > p) continue;
    Eigen::MatrixXd ders = basis_ders(spec, span, t, derivative);
    for (int r = 0; r <= p; ++r) out(static_cast<Eigen::Index>(i), span - p + r) = ders(derivative, r);
  }
  return out;
}

Eigen::VectorXd trapezoid_weights(std::span<const double> grid) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (n < 2) throw InvalidArgument("trapezoid_weights: need at least 2 grid points");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    double h = grid[i + 1] - grid[i];
    if (!(h > 0.0)) throw InvalidArgument("trapezoid_weights: grid must be strictly increasing");
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

Eigen::MatrixXd quadrature_matrix(const BasisSpec& spec, std::span<const double> grid) {
  Eigen::VectorXd w = trapezoid_weights(grid);
  return w.asDiagonal() * eval_basis(spec, grid);
}

Eigen::VectorXd curve_scores(const BasisSpec& spec, std::span<const double> curve,
                             std::span<const double> grid) {
  if (curve.size() != grid.size()) {
    throw InvalidArgument("curve_scores: curve has " + std::to_string(curve.size()) + " values but grid has " +
                          std::to_string(grid.size()));
  }
  Eigen::Map<const Eigen::VectorXd> x(curve.data(), static_cast<Eigen::Index>(curve.size()));
  return quadrature_matrix(spec, grid).transpose() * x;
}

std::vector<double> greville_points(const BasisSpec& spec) {
  std::vector<double> g(spec.dim);
  for (int d = 0; d < spec.dim; ++d) {
    double s = 0.0;
    for (int k = 1; k <= spec.degree; ++k) s += spec.knots[d + k];
    g[d] = spec.degree == 0 ? 0.5 * (spec.knots[d] + spec.knots[d + 1]) : s / spec.degree;
  }
  return g;
}

Eigen::VectorXd interpolate(const BasisSpec& spec, const std::function<double(double)>& f) {
  std::vector<double> g = greville_points(spec);
  Eigen::MatrixXd colloc = eval_basis(spec, g);
  Eigen::VectorXd rhs(spec.dim);
  for (int d = 0; d < spec.dim; ++d) rhs[d] = f(g[d]);
  return colloc.partialPivLu().solve(rhs);
}

double eval_spline(const BasisSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& coef, double t) {
  double grid[1] = {t};
  return (eval_basis(spec, grid) * coef)(0);
}

Eigen::MatrixXd penalty_metric(const BasisSpec& spec, double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("penalty_metric: eta must be finite and >= 0");
  return spec.gram + eta * spec.roughness;
}

}  // namespace mvfreg
