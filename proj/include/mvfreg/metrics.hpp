#pragma once

#include <Eigen/Dense>

#include <vector>

namespace mvfreg {

/// (1/q)(1/m) sum_l ||pred_l - truth_l||^2.
double mspe(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

/// 1 - sum ||fitted - Y||^2 / sum ||Y - Ybar||^2. Throws InvalidArgument when
/// Y has no variation.
double r_squared(const Eigen::MatrixXd& fitted, const Eigen::MatrixXd& y);

struct SensSpec {
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// Share of true predictors selected and share of null predictors left out.
/// Indices are 0-based in [0, p). Specificity is 1 when every predictor is
/// in the truth set. Throws InvalidArgument on an empty truth set.
SensSpec sens_spec(const std::vector<int>& selected, const std::vector<int>& truth, int p);

}  // namespace mvfreg
