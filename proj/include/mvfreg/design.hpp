#pragma once

#include "mvfreg/basis.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace mvfreg {

/// Known regression function and support, present for simulated data.
struct CurveTruth {
  Eigen::MatrixXd f;          // n x m values of the regression function
  std::vector<int> support;   // 0-based predictors with nonzero coefficient
  double scale = 1.0;         // signal scaling constant
  double sigma = 0.0;         // noise standard deviation
};

/// n samples of p predictor curves on a shared grid plus an n x m response.
/// Curve (l, j) occupies columns [j*T, (j+1)*T) of row l in `x`.
struct CurveDataset {
  std::vector<double> grid;
  int p = 1;
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  std::optional<CurveTruth> truth;

  int n() const { return static_cast<int>(y.rows()); }
  int m() const { return static_cast<int>(y.cols()); }
  int T() const { return static_cast<int>(grid.size()); }

  /// Throws InvalidArgument unless n >= 2, T >= 2, m >= 1, p >= 1, shapes
  /// agree, every value is finite and the grid is strictly increasing in [0, 1].
  void validate() const;

  /// Rows in the given order (duplicates allowed); truth is carried along.
  CurveDataset subset(std::span<const int> rows) const;
};

/// Centered score matrix and response plus the block penalty metric.
///   z(l, j*D + d) = integral of (X_lj - mean_j)(t) B_d(t) dt   (trapezoid)
/// Every quadratic form of the estimator goes through z and yc:
///   a' (z'z/n) a          discretizes  the Sigma-hat form
///   a' (z'yc yc'z/n^2) a  discretizes  the Gamma-hat form
struct DesignMatrices {
  int p = 0;
  int dim = 0;
  double eta = 0.0;
  Eigen::MatrixXd z;
  Eigen::MatrixXd yc;
  Eigen::MatrixXd xbar;    // p x T mean curves
  Eigen::VectorXd ybar;    // m
  Eigen::MatrixXd metric;  // G + eta H, shared by all p blocks
  Eigen::MatrixXd gram;
  Eigen::MatrixXd roughness;

  int n() const { return static_cast<int>(z.rows()); }
  int m() const { return static_cast<int>(yc.cols()); }
  int width() const { return p * dim; }
  Eigen::MatrixXd metric_for(double other_eta) const { return gram + other_eta * roughness; }
};

DesignMatrices build_design(const CurveDataset& ds, const BasisSpec& spec, double eta, int threads = 1);

/// Centered scores of q new samples (q x p*T) against stored mean curves.
Eigen::MatrixXd center_and_score(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xbar,
                                 const Eigen::MatrixXd& quad, int p, int threads = 1);

/// sqrt(a_j' metric a_j).
double group_norm(const Eigen::Ref<const Eigen::VectorXd>& block, const Eigen::MatrixXd& metric);

/// tau * [ (1 - lambda) sum_j ||a_j||^2 + lambda (sum_j ||a_j||)^2 ] where
/// ||a_j|| is the group norm under `metric` (blocks of length metric.rows()).
double penalty_value(const Eigen::MatrixXd& metric, double tau, double lambda,
                     const Eigen::Ref<const Eigen::VectorXd>& a);
/// Same, with the design's own metric G + eta H.
double penalty_value(const DesignMatrices& dm, double tau, double lambda, const Eigen::Ref<const Eigen::VectorXd>& a);

}  // namespace mvfreg
