#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace oracle {

double cox_de_boor(const std::vector<double>& knots, int degree, int d, double t) {
  if (degree == 0) {
    if (knots[d] <= t && t < knots[d + 1]) return 1.0;
    // Close the final non-empty span at the right boundary.
    if (t == knots.back() && knots[d] < knots[d + 1] && knots[d + 1] == knots.back()) return 1.0;
    return 0.0;
  }
  double left = 0.0, right = 0.0;
  double dl = knots[d + degree] - knots[d];
  if (dl > 0.0) left = (t - knots[d]) / dl * cox_de_boor(knots, degree - 1, d, t);
  double dr = knots[d + degree + 1] - knots[d + 1];
  if (dr > 0.0) right = (knots[d + degree + 1] - t) / dr * cox_de_boor(knots, degree - 1, d + 1, t);
  return left + right;
}

double spline_value(const std::vector<double>& knots, int degree, const Eigen::VectorXd& c, double t) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < c.size(); ++d) s += c(d) * cox_de_boor(knots, degree, static_cast<int>(d), t);
  return s;
}

double integrate_product(const std::vector<double>& knots, int degree, const Eigen::VectorXd& a,
                         const Eigen::VectorXd& b, int levels) {
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
    double lo = knots[s], hi = knots[s + 1];
    if (!(hi > lo)) continue;
    // Evaluate strictly inside the span near its ends so the half-open
    // convention of the recursion does not matter.
    auto f = [&](double t) {
      double tt = std::clamp(t, lo + 1e-15, hi - 1e-15);
      return spline_value(knots, degree, a, tt) * spline_value(knots, degree, b, tt);
    };
    // Romberg table from trapezoid sums with 1, 2, 4, ... subintervals.
    std::vector<std::vector<double>> r(levels + 1);
    double h = hi - lo;
    r[0].push_back(0.5 * h * (f(lo) + f(hi)));
    for (int i = 1; i <= levels; ++i) {
      h *= 0.5;
      double mid = 0.0;
      for (long k = 1; k < (1L << i); k += 2) mid += f(lo + k * h);
      r[i].push_back(0.5 * r[i - 1][0] + h * mid);
      double factor = 1.0;
      for (int j = 1; j <= i; ++j) {
        factor *= 4.0;
        r[i].push_back(r[i][j - 1] + (r[i][j - 1] - r[i - 1][j - 1]) / (factor - 1.0));
      }
    }
    total += r[levels][levels];
  }
  return total;
}

double sigma_form(const mvfreg::CurveDataset& ds, const std::vector<double>& knots, int degree,
                  const Eigen::VectorXd& a) {
  const int T = ds.T();
  const int n = ds.n();
  const int D = static_cast<int>(knots.size()) - degree - 1;
  Eigen::VectorXd w(T);
  for (int i = 0; i < T; ++i) {
    double l = i > 0 ? ds.grid[i] - ds.grid[i - 1] : 0.0;
    double r = i + 1 < T ? ds.grid[i + 1] - ds.grid[i] : 0.0;
    w(i) = 0.5 * (l + r);
  }
  Eigen::VectorXd alpha(ds.p * T);
  for (int j = 0; j < ds.p; ++j) {
    Eigen::VectorXd cj = a.segment(j * D, D);
    for (int i = 0; i < T; ++i) alpha(j * T + i) = spline_value(knots, degree, cj, ds.grid[i]);
  }
  Eigen::RowVectorXd mean = ds.x.colwise().mean();
  Eigen::MatrixXd xc = ds.x.rowwise() - mean;
  Eigen::MatrixXd sigma = xc.transpose() * xc / n;  // (pT) x (pT) kernel on the grid
  Eigen::VectorXd wa(ds.p * T);
  for (int j = 0; j < ds.p; ++j) wa.segment(j * T, T) = w.cwiseProduct(alpha.segment(j * T, T));
  return wa.dot(sigma * wa);
}

DenseComponents dense_components(const Eigen::MatrixXd& A, const Eigen::MatrixXd& S, const Eigen::MatrixXd& P, int K) {
  const Eigen::Index d = A.rows();
  DenseComponents out;
  out.sigma2.resize(K);
  out.coeffs.resize(d, K);
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd basis;
    if (k == 0) {
      basis = Eigen::MatrixXd::Identity(d, d);
    } else {
      Eigen::MatrixXd cons = S * out.coeffs.leftCols(k);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(cons);
      Eigen::MatrixXd q = qr.householderQ();
      basis = q.rightCols(d - k);
    }
    Eigen::MatrixXd an = basis.transpose() * A * basis;
    Eigen::MatrixXd bn = basis.transpose() * (S + P) * basis;
    an = 0.5 * (an + an.transpose()).eval();
    bn = 0.5 * (bn + bn.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(an, bn);
    Eigen::Index top = an.rows() - 1;
    Eigen::VectorXd a = basis * es.eigenvectors().col(top);
    a /= std::sqrt(a.dot(S * a));
    out.sigma2(k) = es.eigenvalues()(top);
    out.coeffs.col(k) = a;
  }
  return out;
}

Eigen::VectorXd projection_eigenvalues(const Eigen::MatrixXd& z, const Eigen::MatrixXd& yc) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-10 * sv(0)) ++rank;
  }
  Eigen::MatrixXd u = svd.matrixU().leftCols(rank);
  Eigen::MatrixXd uy = u.transpose() * yc;
  const double n = static_cast<double>(z.rows());
  // For t = z a the quotient a'(z'yc yc'z/n^2)a / a'(z'z/n)a is
  // ||yc't||^2 / (n ||t||^2), so its stationary values over col(z) are the
  // eigenvalues of yc' P yc / n.
  Eigen::MatrixXd f = uy.transpose() * uy / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f);
  return es.eigenvalues().reverse();
}

Eigen::MatrixXd least_squares(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd design(scores.rows(), scores.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(scores.cols()) = scores;
  return (design.transpose() * design).ldlt().solve(design.transpose() * y);
}

mvfreg::CurveDataset random_dataset(int n, int p, int m, int T, std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  mvfreg::CurveDataset ds;
  ds.p = p;
  for (int i = 0; i < T; ++i) ds.grid.push_back(static_cast<double>(i) / (T - 1));
  ds.x.resize(n, p * T);
  for (int l = 0; l < n; ++l) {
    for (int j = 0; j < p; ++j) {
      double c[8];
      for (double& v : c) v = normal(rng);
      for (int i = 0; i < T; ++i) {
        double t = ds.grid[i], s = 0.0;
        for (int k = 0; k < 4; ++k) {
          s += c[2 * k] * std::sin((k + 1) * std::numbers::pi * t) / (k + 1);
          s += c[2 * k + 1] * std::cos((k + 1) * std::numbers::pi * t) / (k + 1);
        }
        ds.x(l, j * T + i) = s;
      }
    }
  }
  // Response: trapezoid integrals of the curves against fixed smooth weights.
  Eigen::MatrixXd b(p * T, m);
  for (int j = 0; j < p; ++j) {
    for (int r = 0; r < m; ++r) {
      for (int i = 0; i < T; ++i) b(j * T + i, r) = std::cos((r + 1) * ds.grid[i] + j) / T;
    }
  }
  ds.y = ds.x * b;
  for (int l = 0; l < n; ++l) {
    for (int r = 0; r < m; ++r) ds.y(l, r) += 1.0 + noise * normal(rng);
  }
  return ds;
}

mvfreg::CurveDataset white_noise_dataset(int n, int p, int m, int T, std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  mvfreg::CurveDataset ds;
  ds.p = p;
  for (int i = 0; i < T; ++i) ds.grid.push_back(static_cast<double>(i) / (T - 1));
  ds.x.resize(n, p * T);
  for (Eigen::Index i = 0; i < ds.x.size(); ++i) ds.x.data()[i] = normal(rng);
  Eigen::MatrixXd b(p * T, m);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng) / T;
  ds.y = ds.x * b;
  for (Eigen::Index i = 0; i < ds.y.size(); ++i) ds.y.data()[i] += noise * normal(rng);
  return ds;
}

Eigen::MatrixXd block_diagonal(const Eigen::MatrixXd& block, int p) {
  const Eigen::Index d = block.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d * p, d * p);
  for (int j = 0; j < p; ++j) out.block(j * d, j * d, d, d) = block;
  return out;
}

}  // namespace oracle
