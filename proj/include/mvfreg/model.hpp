#pragma once

#include "mvfreg/basis.hpp"
#include "mvfreg/design.hpp"
#include "mvfreg/eigensolver.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace mvfreg {

/// Intercept, K components and their loadings:
///   prediction = mu + sum_k [ integral (X - xbar)' alpha_k ] w_k
/// where w_k is row k of `w`.
struct FittedModel {
  BasisSpec spec;
  PenaltyConfig config;
  int K = 0;
  int p = 0;
  int m = 0;
  int n_train = 0;
  std::vector<double> grid;
  Eigen::MatrixXd xbar;  // p x T
  Eigen::VectorXd mu;    // m
  Eigen::MatrixXd w;     // K x m
  ComponentSet components;  // exactly K components; scores are the training scores
  std::vector<std::pair<std::string, std::string>> meta;

  /// Training fitted values mu + scores * w.
  Eigen::MatrixXd fitted() const;
};

/// Builds the design, computes K components and refits the loadings.
/// Throws InvalidArgument if K exceeds min(m, n - 1, p*D).
FittedModel fit(const CurveDataset& ds, const BasisSpec& spec, const PenaltyConfig& config, int K, int threads = 1);

/// Loadings for the first K of already computed components on `dm`.
FittedModel fit_from_components(const DesignMatrices& dm, const BasisSpec& spec, const std::vector<double>& grid,
                                const ComponentSet& comps, int K);

/// q x m predictions for q x (p*T) curves. An empty `grid` means the
/// training grid; any other grid is linearly interpolated onto the training
/// grid and must cover it (no extrapolation).
Eigen::MatrixXd predict(const FittedModel& model, const Eigen::MatrixXd& xnew, const std::vector<double>& grid = {});

/// Entry j is the T x m matrix of B_jr(t) = sum_k alpha_kj(t) w_kr on `grid`.
std::vector<Eigen::MatrixXd> coefficient_surface(const FittedModel& model, const std::vector<double>& grid);

/// Predictors with a nonzero contribution. Smooth fits do not select and
/// return every predictor unless the fit is identically zero.
std::vector<int> selected_predictors(const FittedModel& model);

/// Versioned JSON document; doubles are written in shortest round-trip form
/// so a reloaded model predicts bit-for-bit identically.
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

/// Linear interpolation of q x (p*T_from) curves to `to`. Throws
/// InvalidArgument if `to` reaches outside [from.front(), from.back()].
Eigen::MatrixXd interpolate_curves(const Eigen::MatrixXd& x, int p, const std::vector<double>& from,
                                   const std::vector<double>& to);

struct BootstrapOptions {
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 1;
  int threads = 1;
  int max_redraws = 10;
};

struct BootstrapResult {
  Eigen::MatrixXd lower;  // q x m
  Eigen::MatrixXd upper;
  int redraws = 0;        // degenerate resamples replaced
};

/// Refit procedure applied to every resample (fixed configuration, or a
/// full tuning run).
using Refit = std::function<FittedModel(const CurveDataset&)>;

/// Percentile intervals from refits on resamples drawn with replacement.
/// Resample b uses its own random stream, so results do not depend on the
/// thread count. A resample whose rows are all the same sample is redrawn,
/// at most `max_redraws` times.
BootstrapResult bootstrap_intervals(const CurveDataset& ds, const Refit& refit, const Eigen::MatrixXd& xnew,
                                    const BootstrapOptions& opts);

/// Fixed (config, K) refit.
Refit fixed_refit(const BasisSpec& spec, const PenaltyConfig& config, int K);

/// Linear-interpolation percentile (sample quantile type 7) of `values`.
double percentile(std::vector<double> values, double prob);

}  // namespace mvfreg
