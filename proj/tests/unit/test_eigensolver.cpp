#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mvfreg/eigensolver.hpp"
#include "mvfreg/error.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace mvfreg;

namespace {

struct Instance {
  CurveDataset ds;
  BasisSpec spec;
  DesignMatrices dm;
};

Instance smooth_instance(int n, int p, int m, int dim, std::uint64_t seed, double eta = 0.0) {
  Instance in{oracle::random_dataset(n, p, m, 24, seed, 0.3), make_basis(dim), {}};
  in.dm = build_design(in.ds, in.spec, eta);
  return in;
}

// p predictors of which only predictor 0 carries signal.
Instance single_signal_instance(int n, int p, int m, std::uint64_t seed, double noise) {
  Instance in{oracle::random_dataset(n, p, m, 32, seed), make_basis(8), {}};
  const int T = in.ds.T();
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal;
  for (int l = 0; l < n; ++l) {
    for (int r = 0; r < m; ++r) {
      double s = 0.0;
      for (int i = 0; i < T; ++i) s += in.ds.x(l, i) * std::cos((r + 1) * in.ds.grid[i]) / T;
      in.ds.y(l, r) = 1.0 + s + noise * normal(rng);
    }
  }
  in.dm = build_design(in.ds, in.spec, 0.0);
  return in;
}

Eigen::MatrixXd numerator(const DesignMatrices& dm) {
  const double n = dm.n();
  Eigen::MatrixXd m = dm.yc.transpose() * dm.z;
  return m.transpose() * m / (n * n);
}

Eigen::MatrixXd covariance(const DesignMatrices& dm) { return dm.z.transpose() * dm.z / dm.n(); }

void check_component_invariants(const ComponentSet& cs, const DesignMatrices& dm) {
  const double n = dm.n();
  const int K = cs.nonzero();
  for (int k = 0; k < K; ++k) {
    CHECK(std::abs(cs.scores.col(k).squaredNorm() / n - 1.0) <= 1e-8);
    CHECK((dm.z * cs.coeffs.col(k) - cs.scores.col(k)).cwiseAbs().maxCoeff() <= 1e-10);
    for (int j = 0; j < k; ++j) CHECK(std::abs(cs.scores.col(k).dot(cs.scores.col(j))) <= 1e-8 * n);
    if (k > 0) CHECK(cs.sigma2(k) <= cs.sigma2(k - 1) * (1.0 + 1e-12));
  }
  for (int k = K; k < cs.size(); ++k) CHECK(cs.sigma2(k) == 0.0);
}

}  // namespace

TEST_CASE("penalty configuration") {
  CHECK(to_string(PenaltyMode::Smooth) == "smooth");
  CHECK(to_string(PenaltyMode::SmoothSparse) == "smooth-sparse");
  CHECK(parse_penalty_mode("sparse") == PenaltyMode::SmoothSparse);
  CHECK_THROWS_AS(parse_penalty_mode("lasso"), InvalidArgument);
  CHECK_NOTHROW(PenaltyConfig::smooth(1.0, 0.1).validate());
  PenaltyConfig bad = PenaltyConfig::smooth(1.0, 0.1);
  bad.lambda = 0.2;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_THROWS_AS(PenaltyConfig::sparse(1.0, 1.5, 0.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(PenaltyConfig::smooth(-1.0, 0.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(PenaltyConfig::smooth(1.0, std::nan("")).validate(), InvalidArgument);
}

TEST_CASE("component cap") {
  Instance in = smooth_instance(10, 1, 3, 6, 1);
  CHECK(component_cap(in.dm, 10) == 3);
  CHECK(component_cap(in.dm, 2) == 2);
  Instance wide = smooth_instance(4, 1, 6, 6, 2);
  CHECK(component_cap(wide.dm, 10) == 3);
}

TEST_CASE("deflation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(15, 6);
  Eigen::VectorXd t(15);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = normal(rng);
  Eigen::MatrixXd once = deflate(z, t);
  CHECK((once.transpose() * t).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((deflate(once, t) - once).cwiseAbs().maxCoeff() <= 1e-12);

  // A vector orthogonal to every column leaves z unchanged.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeFullU);
  Eigen::VectorXd orth = svd.matrixU().col(10);
  CHECK((deflate(z, orth) - z).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(deflate(z, Eigen::VectorXd::Zero(15)), InvalidArgument);
  CHECK_THROWS_AS(deflate(z, Eigen::VectorXd::Ones(4)), InvalidArgument);
}

TEST_CASE("smooth path agrees with a dense generalized eigensolve") {
  struct Case {
    int n, p, m, dim;
    double tau, eta;
  };
  // Both the dense (pD < n) and the kernel (pD >= n) routes.
  for (Case c : {Case{60, 2, 3, 8, 1e-3, 0.0}, Case{60, 3, 4, 10, 0.1, 1e-2}, Case{25, 4, 3, 12, 1e-2, 1e-3},
                 Case{30, 10, 5, 20, 1.0, 0.1}}) {
    Instance in = smooth_instance(c.n, c.p, c.m, c.dim, 10 + c.n + c.p, c.eta);
    const int K = std::min(c.m, c.n - 1);
    ComponentSet cs = fit_components_smooth(in.dm, c.tau, c.eta, K);
    Eigen::MatrixXd pen = c.tau * oracle::block_diagonal(in.dm.metric_for(c.eta), c.p);
    oracle::DenseComponents ref = oracle::dense_components(numerator(in.dm), covariance(in.dm), pen, K);
    CHECK(cs.size() == K);
    for (int k = 0; k < K; ++k) {
      CHECK(std::abs(cs.sigma2(k) - ref.sigma2(k)) <= 1e-8 * ref.sigma2(k));
      // Same direction up to sign, measured by score correlation.
      Eigen::VectorXd ts = in.dm.z * ref.coeffs.col(k);
      double cosine = std::abs(ts.dot(cs.scores.col(k))) / (ts.norm() * cs.scores.col(k).norm());
      CHECK(cosine >= 1.0 - 1e-7);
    }
    check_component_invariants(cs, in.dm);
  }
}

TEST_CASE("vanishing penalty reproduces the projection eigenvalues") {
  for (int r = 0; r < 5; ++r) {
    CurveDataset ds = oracle::white_noise_dataset(20, 2, 3, 32, 500 + r);
    DesignMatrices dm = build_design(ds, make_basis(8), 0.0);
    ComponentSet cs = fit_components_smooth(dm, 1e-12, 0.0, 3);
    Eigen::VectorXd ev = oracle::projection_eigenvalues(dm.z, dm.yc);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(cs.sigma2(k) - ev(k)) <= 1e-8 * ev(k));
  }
}

TEST_CASE("single response aligns with the ridge direction") {
  Instance in = smooth_instance(40, 2, 1, 8, 20);
  in.dm.yc = in.dm.z.col(0);
  const double tau = 1e-9;
  ComponentSet cs = fit_components_smooth(in.dm, tau, 0.0, 1);
  Eigen::MatrixXd s = covariance(in.dm);
  Eigen::MatrixXd b = s + tau * oracle::block_diagonal(in.dm.gram, 2);
  Eigen::VectorXd ridge = b.ldlt().solve(in.dm.z.transpose() * in.dm.yc / in.dm.n());
  Eigen::VectorXd a = cs.coeffs.col(0);
  double cosine = std::abs(a.dot(s * ridge)) / std::sqrt(a.dot(s * a) * ridge.dot(s * ridge));
  CHECK(cosine >= 0.999);
}

TEST_CASE("zero centered response gives zero components") {
  Instance in = smooth_instance(30, 3, 2, 8, 21);
  in.dm.yc.setZero();
  ComponentSet sm = fit_components_smooth(in.dm, 0.1, 0.0, 2);
  CHECK(sm.nonzero() == 0);
  CHECK(sm.sigma2.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sm.coeffs.cwiseAbs().maxCoeff() == 0.0);
  ComponentSet sp = fit_components_sparse(in.dm, 0.1, 0.1, 0.0, 2);
  CHECK(sp.nonzero() == 0);
  CHECK(sp.coeffs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unpenalized singular problems ask for regularization") {
  Instance in = smooth_instance(10, 2, 2, 8, 22);
  CHECK_THROWS_AS(fit_components_smooth(in.dm, 0.0, 0.0, 2), NumericalError);
  Instance ok = smooth_instance(60, 1, 2, 8, 23);
  CHECK_NOTHROW(fit_components_smooth(ok.dm, 0.0, 0.0, 2));
  CHECK_THROWS_AS(fit_components_sparse(in.dm, 0.0, 0.5, 0.0, 2), InvalidArgument);
  CHECK_THROWS_AS(fit_components_sparse(in.dm, 1.0, 0.0, 0.0, 2), InvalidArgument);
}

TEST_CASE("quotient is scale invariant and equals the eigenvalue") {
  Instance in = smooth_instance(40, 3, 3, 8, 24, 1e-3);
  for (PenaltyConfig cfg : {PenaltyConfig::smooth(0.05, 1e-3), PenaltyConfig::sparse(0.05, 0.3, 1e-3)}) {
    ComponentSet cs = fit_components(in.dm, cfg, 3);
    Eigen::VectorXd a = cs.coeffs.col(0);
    double q = penalized_quotient(in.dm, cfg, a);
    CHECK(std::abs(penalized_quotient(in.dm, cfg, 3.7 * a) - q) <= 1e-10 * q);
    CHECK(std::abs(penalized_quotient(in.dm, cfg, -0.01 * a) - q) <= 1e-10 * q);
    CHECK(std::abs(q - cs.sigma2(0)) <= 1e-10 * q);
  }
}

TEST_CASE("sign convention makes the dominant response covariance positive") {
  Instance in = smooth_instance(40, 2, 3, 8, 25);
  ComponentSet cs = fit_components_smooth(in.dm, 0.01, 0.0, 3);
  for (int k = 0; k < cs.nonzero(); ++k) {
    Eigen::VectorXd g = in.dm.yc.transpose() * cs.scores.col(k);
    Eigen::Index i = 0;
    g.cwiseAbs().maxCoeff(&i);
    CHECK(g(i) > 0.0);
  }
}

TEST_CASE("smooth solver reuse across tau matches one-shot solves") {
  Instance in = smooth_instance(30, 4, 3, 10, 26, 0.1);
  SmoothSolver solver(in.dm, 0.1);
  for (double tau : {1e-6, 1e-2, 10.0}) {
    ComponentSet a = solver.solve(tau, 3);
    ComponentSet b = fit_components_smooth(in.dm, tau, 0.1, 3);
    CHECK(a.sigma2 == b.sigma2);
    CHECK(a.coeffs == b.coeffs);
  }
}

TEST_CASE("sparse path with tiny lambda recovers the smooth solution") {
  SUBCASE("leading component at moderate tau") {
    Instance in = smooth_instance(40, 3, 3, 8, 27);
    for (double tau : {1e-3, 0.1, 1.0}) {
      ComponentSet sm = fit_components_smooth(in.dm, tau, 0.0, 1);
      ComponentSet sp = fit_components_sparse(in.dm, tau, 1e-8, 0.0, 1);
      CHECK(std::abs(sp.sigma2(0) - sm.sigma2(0)) <= 1e-6 * sm.sigma2(0));
    }
  }
  SUBCASE("all components as the penalty vanishes") {
    CurveDataset ds = oracle::white_noise_dataset(20, 2, 3, 32, 600);
    DesignMatrices dm = build_design(ds, make_basis(8), 0.0);
    ComponentSet sm = fit_components_smooth(dm, 1e-12, 0.0, 3);
    ComponentSet sp = fit_components_sparse(dm, 1e-12, 1e-6, 0.0, 3);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(sp.sigma2(k) - sm.sigma2(k)) <= 1e-5 * sm.sigma2(k));
    check_component_invariants(sp, dm);
  }
}

TEST_CASE("sparse components satisfy the score constraints") {
  Instance in = smooth_instance(40, 6, 4, 8, 28, 1e-3);
  for (auto [tau, lambda] : {std::pair{0.1, 0.1}, {1.0, 0.2}, {10.0, 0.3}}) {
    ComponentSet cs = fit_components_sparse(in.dm, tau, lambda, 1e-3, 4);
    check_component_invariants(cs, in.dm);
  }
}

TEST_CASE("sparse objective never decreases across outer iterations") {
  for (std::uint64_t seed : {30, 31, 32}) {
    Instance in = single_signal_instance(50, 10, 3, seed, 0.5);
    for (auto [tau, lambda] : {std::pair{0.1, 0.1}, {1.0, 0.2}, {10.0, 0.3}, {100.0, 0.4}}) {
      ComponentSet cs = fit_components_sparse(in.dm, tau, lambda, 0.0, 3);
      for (int k = 0; k < cs.nonzero(); ++k) {
        const auto& trace = cs.diagnostics[static_cast<std::size_t>(k)].objective_trace;
        REQUIRE(!trace.empty());
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] * (1.0 - 1e-12));
      }
    }
  }
}

TEST_CASE("noise predictors are thresholded to exact zeros") {
  Instance in = single_signal_instance(50, 10, 2, 40, 0.05);
  const double tau = 1.0, lambda = 0.5;
  SparseOptions opts;
  opts.inner_tol = 1e-12;
  opts.tol = 1e-12;
  ComponentSet cs = fit_components_sparse(in.dm, tau, lambda, 0.0, 1, opts);
  const int D = in.dm.dim;
  const Eigen::MatrixXd& g = in.dm.gram;
  Eigen::VectorXd a = cs.coeffs.col(0);
  CHECK(group_norm(a.segment(0, D), g) > 0.0);
  for (int j = 1; j < 10; ++j) CHECK(a.segment(j * D, D).cwiseAbs().maxCoeff() == 0.0);

  // Group optimality of a* = s a for den(a) - 2 c'a with c = z'yc u / n:
  // zero blocks need ||L^{-1}(c_j - (S a*)_j)|| <= tau lambda sum_i ||a*_i||.
  const double n = in.dm.n();
  Eigen::VectorXd ma = in.dm.yc.transpose() * in.dm.z * a;
  Eigen::VectorXd c = in.dm.z.transpose() * (in.dm.yc * ma.normalized()) / n;
  Eigen::MatrixXd s = covariance(in.dm);
  double den = a.dot(s * a) + penalty_value(g, tau, lambda, a);
  Eigen::VectorXd star = a * (c.dot(a) / den);
  double total = 0.0;
  for (int j = 0; j < 10; ++j) total += group_norm(star.segment(j * D, D), g);
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  Eigen::VectorXd grad = c - s * star;
  for (int j = 1; j < 10; ++j) {
    Eigen::VectorXd w = llt.matrixL().solve(grad.segment(j * D, D));
    CHECK(w.norm() <= tau * lambda * total * (1.0 + 1e-6));
  }
}

TEST_CASE("stronger sparsity never adds blocks to the leading component") {
  for (std::uint64_t seed : {50, 51}) {
    Instance in = single_signal_instance(50, 10, 3, seed, 1.0);
    for (double eta : {1e-6, 1e-3, 1.0}) {
      SparseSolver solver(in.dm, eta);
      int previous = 11;
      for (auto [tau, lambda] : {std::pair{0.1, 0.1}, {1.0, 0.2}, {10.0, 0.3}, {100.0, 0.4}}) {
        ComponentSet cs = solver.solve(tau, lambda, 1);
        Eigen::MatrixXd metric = in.dm.metric_for(eta);
        int active = 0;
        for (int j = 0; j < 10; ++j) active += group_norm(cs.coeffs.col(0).segment(j * 8, 8), metric) > 1e-10;
        CHECK(active <= previous);
        previous = active;
      }
    }
  }
}
