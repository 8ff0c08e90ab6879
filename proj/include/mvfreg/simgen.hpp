#pragma once

#include "mvfreg/design.hpp"
#include "mvfreg/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mvfreg {

/// Settings of one simulated scenario. Scenario 1 and 2 have one predictor,
/// 3 has 50 equicorrelated predictors (knob rho) and 4 has 1000 predictors
/// built from moving sums of `lag` independent Gaussian processes.
struct SimScenario {
  int id = 1;
  int n = 100;
  int m = 1;
  double sigma = 0.1;
  double rho = 0.2;
  int lag = 2;
  int T = 64;
  std::uint64_t seed = 1;
  int snr_draws = 10000;

  int p() const;
  void validate() const;
};

/// A drawn instance of a scenario: the mixing matrix is fixed and the
/// scale c is set so that the signal variance averaged over response
/// coordinates is 1. Sampling from the same model gives training and test
/// sets that share the regression function.
class SimModel {
 public:
  explicit SimModel(const SimScenario& sc);

  const SimScenario& scenario() const { return sc_; }
  int p() const { return p_; }
  int m() const { return sc_.m; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<int>& support() const { return support_; }
  double scale() const { return scale_; }
  /// T x m values of the (unscaled) coefficient functions of predictor j;
  /// zero for predictors outside the support.
  Eigen::MatrixXd coefficient(int j) const;

  /// n x (p*T) predictor curves.
  Eigen::MatrixXd draw_curves(int n, Rng& rng) const;
  /// n x m values of mu + c * integral X' B dt by trapezoid rule.
  Eigen::MatrixXd regression_function(const Eigen::MatrixXd& x) const;
  /// Curves from `curve_rng`, noise N(0, sigma^2) from `noise_rng`.
  CurveDataset sample(int n, double sigma, Rng& curve_rng, Rng& noise_rng) const;

  /// Scale c making the average coordinate variance of c * integral X' B
  /// equal to 1, estimated from `draws` signal draws. Throws InvalidArgument
  /// for an identically zero signal.
  double estimate_scale(int draws, Rng& rng) const;

 private:
  Eigen::MatrixXd draw_support_curves(int n, Rng& rng) const;
  Eigen::MatrixXd unscaled_signal(const Eigen::MatrixXd& support_curves) const;

  SimScenario sc_;
  int p_ = 1;
  std::vector<double> grid_;
  Eigen::VectorXd weights_;
  std::vector<int> support_;
  std::vector<Eigen::MatrixXd> coef_;  // per support entry, T x m
  Eigen::MatrixXd mixing_;
  Eigen::MatrixXd gp_chol_;   // scenarios 1 and 4
  Eigen::MatrixXd fourier_;   // scenarios 2 and 3: T x 40 sin/cos columns
  double scale_ = 1.0;
};

/// Draws the model (mixing from the scenario seed) and a dataset of size
/// sc.n with noise level sc.sigma.
CurveDataset generate(const SimScenario& sc);

CurveDataset gen_sim1(int n, int m, double sigma, std::uint64_t seed);
CurveDataset gen_sim2(int n, int m, double sigma, std::uint64_t seed);
CurveDataset gen_sim3(int n, int m, double sigma, double rho, std::uint64_t seed);
CurveDataset gen_sim4(int n, int m, double sigma, int lag, std::uint64_t seed);

/// Scale constant of the scenario's model.
double snr_scale(const SimScenario& sc);

/// 1 / sqrt(mean column variance) of draws x m unscaled signal values.
/// Throws InvalidArgument when the signal has no variation.
double scale_from_signal(const Eigen::MatrixXd& signal);

/// Lower Cholesky factor of exp(-(30 (s - t))^2) on the grid. Starts with
/// jitter 1e-10 on the diagonal and raises it tenfold until the
/// factorization succeeds.
Eigen::MatrixXd gp_cholesky(const std::vector<double>& grid, double* jitter_used = nullptr);

/// Uniform grid of T points i / (T - 1).
std::vector<double> uniform_grid(int T);

enum class CovCase { AR, CS };
CovCase parse_cov_case(const std::string& s);

/// Tail ratios sum_{k>K} s_k / sum_k s_k for K = 0..m of the eigenvalues of
/// an m x m covariance: rho^|i-j| (AR) or unit diagonal with constant
/// off-diagonal rho (CS).
std::vector<double> fig1_curves(int m, CovCase cov, double rho);

struct DemoResult {
  std::vector<double> grid;
  std::vector<double> optimal;  // index K = 0..k_max
  std::vector<double> fpca;
  std::vector<double> fpls;
};

/// Relative mean squared error of rank-K approximations of E(Y | X) for
/// Brownian-motion predictors and b_k(t) = sin(k pi t) + 2 sin((k+1) pi t),
/// k = 1..5, comparing the optimal decomposition with FPCA and FPLS
/// directions. All expectations are discretized on the grid with trapezoid
/// weights.
DemoResult brownian_demo(int T = 64, int k_max = 5);

}  // namespace mvfreg
