#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mvfreg/error.hpp"
#include "mvfreg/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace mvfreg;

namespace {

// Pearson correlation of two columns.
double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

double sample_variance(const Eigen::VectorXd& a) {
  return (a.array() - a.mean()).square().sum() / static_cast<double>(a.size() - 1);
}

SimScenario scenario(int id, int n, int m, double sigma, std::uint64_t seed) {
  SimScenario sc;
  sc.id = id;
  sc.n = n;
  sc.m = m;
  sc.sigma = sigma;
  sc.seed = seed;
  return sc;
}

}  // namespace

TEST_CASE("scenario dimensions and validation") {
  CHECK(scenario(1, 10, 1, 0.1, 1).p() == 1);
  CHECK(scenario(2, 10, 1, 0.1, 1).p() == 1);
  CHECK(scenario(3, 10, 1, 0.1, 1).p() == 50);
  CHECK(scenario(4, 10, 1, 0.1, 1).p() == 1000);
  CHECK_THROWS_AS(scenario(9, 10, 1, 0.1, 1).validate(), InvalidArgument);
  CHECK_THROWS_AS(scenario(1, 1, 1, 0.1, 1).validate(), InvalidArgument);
  CHECK_THROWS_AS(scenario(1, 10, 0, 0.1, 1).validate(), InvalidArgument);
  CHECK_THROWS_AS(scenario(1, 10, 1, -0.1, 1).validate(), InvalidArgument);
  SimScenario bad = scenario(3, 10, 1, 0.1, 1);
  bad.rho = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = scenario(4, 10, 1, 0.1, 1);
  bad.lag = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("generated datasets are valid and deterministic") {
  CurveDataset a = gen_sim1(20, 3, 0.1, 5);
  CurveDataset b = gen_sim1(20, 3, 0.1, 5);
  CurveDataset c = gen_sim1(20, 3, 0.1, 6);
  CHECK_NOTHROW(a.validate());
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.x != c.x);
  CHECK(a.T() == 64);
  REQUIRE(a.truth.has_value());
  CHECK(a.truth->sigma == 0.1);
}

TEST_CASE("noiseless responses equal the regression function") {
  CurveDataset ds = gen_sim2(30, 4, 0.0, 7);
  CHECK(ds.y == ds.truth->f);
}

TEST_CASE("the noise level changes only the noise") {
  CurveDataset a = gen_sim2(30, 3, 0.1, 8);
  CurveDataset b = gen_sim2(30, 3, 0.2, 8);
  CHECK(a.x == b.x);
  CHECK(a.truth->f == b.truth->f);
  Eigen::MatrixXd ea = a.y - a.truth->f, eb = b.y - b.truth->f;
  CHECK((eb - 2.0 * ea).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("Gaussian process curves have unit variance") {
  CurveDataset ds = gen_sim1(5000, 1, 0.1, 9);
  Eigen::VectorXd mid = ds.x.col(32);
  CHECK(std::abs(sample_variance(mid) - 1.0) <= 0.05);
  CHECK(std::abs(mid.mean()) <= 0.05);
}

TEST_CASE("Fourier curves have the summed coefficient variance") {
  CurveDataset ds = gen_sim2(5000, 1, 0.1, 10);
  double expected = 0.0;
  for (int k = 1; k <= 20; ++k) expected += 1.0 / std::sqrt(static_cast<double>(k));
  CHECK(std::abs(sample_variance(ds.x.col(20)) / expected - 1.0) <= 0.05);
}

TEST_CASE("equicorrelated predictors") {
  const int T = 64;
  CurveDataset indep = gen_sim3(2000, 1, 0.1, 0.0, 11);
  CHECK(std::abs(correlation(indep.x.col(10), indep.x.col(T + 10))) <= 0.1);
  CurveDataset corr = gen_sim3(2000, 1, 0.1, 0.5, 11);
  CHECK(std::abs(correlation(corr.x.col(10), corr.x.col(7 * T + 10)) - 0.5) <= 0.06);
}

TEST_CASE("moving-sum predictors share lag - 1 processes with their neighbour") {
  const int T = 64;
  for (int lag : {1, 2, 5}) {
    CurveDataset ds = gen_sim4(1500, 1, 0.1, lag, 12);
    REQUIRE(ds.p == 1000);
    double expected = static_cast<double>(lag - 1) / lag;
    double r = correlation(ds.x.col(32), ds.x.col(T + 32));
    CHECK(std::abs(r - expected) <= 0.08);
    CHECK(std::abs(sample_variance(ds.x.col(5 * T + 32)) - 1.0) <= 0.12);
  }
}

TEST_CASE("supports") {
  CHECK(gen_sim1(5, 1, 0.1, 1).truth->support == std::vector<int>{0});
  CHECK(gen_sim2(5, 1, 0.1, 1).truth->support == std::vector<int>{0});
  CHECK(gen_sim3(5, 1, 0.1, 0.2, 1).truth->support == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(gen_sim4(5, 1, 0.1, 2, 1).truth->support == std::vector<int>{0, 10, 20, 30, 40});
  SimModel model(scenario(3, 5, 2, 0.1, 1));
  CHECK(model.coefficient(7).cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.coefficient(2).cwiseAbs().maxCoeff() > 0.0);
  CHECK_THROWS_AS(model.coefficient(50), InvalidArgument);
}

TEST_CASE("regression function recomputed from the coefficient functions") {
  for (int id : {1, 2, 3, 4}) {
    SimScenario sc = scenario(id, 20, 3, 0.1, 13);
    SimModel model(sc);
    Rng curves = make_stream(1, 1), noise = make_stream(1, 2);
    CurveDataset ds = model.sample(20, 0.1, curves, noise);
    const int T = 64;
    const auto& g = model.grid();
    Eigen::MatrixXd f = Eigen::MatrixXd::Ones(20, 3);
    for (int j : ds.truth->support) {
      Eigen::MatrixXd b = model.coefficient(j);
      for (int l = 0; l < 20; ++l) {
        for (int r = 0; r < 3; ++r) {
          double s = 0.0;
          for (int i = 0; i + 1 < T; ++i) {
            s += 0.5 * (g[i + 1] - g[i]) *
                 (ds.x(l, j * T + i) * b(i, r) + ds.x(l, j * T + i + 1) * b(i + 1, r));
          }
          f(l, r) += model.scale() * s;
        }
      }
    }
    CHECK((f - ds.truth->f).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("mixing weights lie in the unit interval") {
  SimModel model(scenario(3, 5, 4, 0.1, 14));
  const auto& g = model.grid();
  const double pi = std::numbers::pi;
  Eigen::MatrixXd beta(64, 3);
  for (int i = 0; i < 64; ++i) {
    for (int k = 1; k <= 3; ++k) beta(i, k - 1) = std::cos(k * pi * g[i]);
  }
  Eigen::MatrixXd mix = beta.colPivHouseholderQr().solve(model.coefficient(1));
  CHECK((beta * mix - model.coefficient(1)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(mix.minCoeff() > 0.0);
  CHECK(mix.maxCoeff() < 1.0);
}

TEST_CASE("signal scale gives unit signal variance") {
  SimScenario sc = scenario(2, 20, 5, 0.1, 15);
  sc.snr_draws = 40000;
  SimModel model(sc);
  Rng curves = make_stream(99, stream::kCurves), noise = make_stream(99, stream::kNoise);
  CurveDataset ds = model.sample(40000, 0.0, curves, noise);
  double v = 0.0;
  for (int r = 0; r < 5; ++r) v += sample_variance(ds.truth->f.col(r));
  CHECK(std::abs(v / 5.0 - 1.0) <= 0.02);
  CHECK(snr_scale(sc) == model.scale());
}

TEST_CASE("independent Monte Carlo draws agree on the scale") {
  SimModel model(scenario(1, 20, 1, 0.1, 16));
  Rng a = make_stream(1, stream::kSnr), b = make_stream(2, stream::kSnr);
  double ca = model.estimate_scale(10000, a), cb = model.estimate_scale(10000, b);
  CHECK(std::abs(ca / cb - 1.0) <= 0.02);
  CHECK_THROWS_AS(model.estimate_scale(1, a), InvalidArgument);
}

TEST_CASE("scale_from_signal") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Random(100, 3);
  CHECK(scale_from_signal(2.0 * s) == doctest::Approx(scale_from_signal(s) / 2.0).epsilon(1e-14));
  CHECK(scale_from_signal(s.array() + 5.0) == doctest::Approx(scale_from_signal(s)).epsilon(1e-12));
  CHECK_THROWS_AS(scale_from_signal(Eigen::MatrixXd::Zero(10, 2)), InvalidArgument);
  CHECK_THROWS_AS(scale_from_signal(Eigen::MatrixXd::Constant(10, 2, 3.0)), InvalidArgument);
}

TEST_CASE("Gaussian process factor") {
  auto grid = uniform_grid(64);
  double jitter = 0.0;
  Eigen::MatrixXd l = gp_cholesky(grid, &jitter);
  CHECK(jitter >= 1e-10);
  CHECK(jitter <= 1e-4);
  for (int i = 0; i < 64; i += 7) {
    for (int j = 0; j < 64; j += 5) {
      double d = 30.0 * (grid[i] - grid[j]);
      double target = std::exp(-d * d) + (i == j ? jitter : 0.0);
      CHECK(std::abs(l.row(i).dot(l.row(j)) - target) <= 1e-12);
    }
  }
  CHECK(l.isLowerTriangular());
}

TEST_CASE("uniform grid and covariance case parsing") {
  auto g = uniform_grid(5);
  CHECK(g == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK_THROWS_AS(uniform_grid(1), InvalidArgument);
  CHECK(parse_cov_case("ar") == CovCase::AR);
  CHECK(parse_cov_case("CS") == CovCase::CS);
  CHECK_THROWS_AS(parse_cov_case("xx"), InvalidArgument);
}

TEST_CASE("tail ratios of structured covariances") {
  SUBCASE("compound symmetry has eigenvalues 1 + (m-1) rho and 1 - rho") {
    for (int m : {2, 5, 20}) {
      for (double rho : {0.0, 0.3, 0.5, 0.9}) {
        auto curve = fig1_curves(m, CovCase::CS, rho);
        REQUIRE(static_cast<int>(curve.size()) == m + 1);
        for (int K = 1; K <= m; ++K) {
          double expected = (m - K) * (1.0 - rho) / m;
          CHECK(std::abs(curve[static_cast<std::size_t>(K)] - expected) <= 1e-12);
        }
      }
    }
    CHECK(std::abs(fig1_curves(20, CovCase::CS, 0.5)[1] - 0.475) <= 1e-12);
    auto one = fig1_curves(10, CovCase::CS, 1.0);
    for (int K = 1; K <= 10; ++K) CHECK(one[static_cast<std::size_t>(K)] == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  }
  SUBCASE("independent coordinates lose one m-th per component") {
    auto curve = fig1_curves(8, CovCase::AR, 0.0);
    for (int K = 0; K <= 8; ++K) CHECK(curve[static_cast<std::size_t>(K)] == (8.0 - K) / 8.0);
  }
  SUBCASE("curves start at one, decrease and end at zero") {
    for (CovCase cov : {CovCase::AR, CovCase::CS}) {
      for (double rho : {0.1, 0.5, 0.8}) {
        auto curve = fig1_curves(12, cov, rho);
        CHECK(curve.front() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(curve.back() == 0.0);
        for (std::size_t k = 1; k < curve.size(); ++k) CHECK(curve[k] <= curve[k - 1] + 1e-15);
      }
    }
  }
  CHECK_THROWS_AS(fig1_curves(0, CovCase::AR, 0.5), InvalidArgument);
  CHECK_THROWS_AS(fig1_curves(3, CovCase::CS, -0.9), InvalidArgument);
}

TEST_CASE("Brownian motion comparison") {
  DemoResult d = brownian_demo();
  REQUIRE(d.optimal.size() == 6u);
  REQUIRE(d.fpca.size() == 6u);
  REQUIRE(d.fpls.size() == 6u);
  CHECK(d.optimal[0] == 1.0);
  CHECK(d.fpca[0] == 1.0);
  CHECK(d.fpls[0] == 1.0);
  for (std::size_t k = 1; k < 6; ++k) {
    CHECK(d.optimal[k] <= d.optimal[k - 1] + 1e-12);
    CHECK(d.fpca[k] <= d.fpca[k - 1] + 1e-12);
    CHECK(d.fpls[k] <= d.fpls[k - 1] + 1e-12);
    CHECK(d.optimal[k] <= d.fpca[k] + 1e-12);
    CHECK(d.optimal[k] <= d.fpls[k] + 1e-12);
    CHECK(d.optimal[k] >= 0.0);
  }
  // The mean has rank 5, so five optimal components explain it fully.
  CHECK(d.optimal[5] <= 1e-10);
  CHECK(d.fpca[1] > d.optimal[1]);
  CHECK_THROWS_AS(brownian_demo(64, 0), InvalidArgument);
}
