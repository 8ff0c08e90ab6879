#pragma once

#include "mvfreg/design.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mvfreg {

enum class PenaltyMode { Smooth, SmoothSparse };

std::string to_string(PenaltyMode mode);
PenaltyMode parse_penalty_mode(const std::string& s);

/// tau scales the whole penalty, lambda the share of the squared group-L1
/// part (0 in smooth mode) and eta the roughness weight inside each group norm.
struct PenaltyConfig {
  PenaltyMode mode = PenaltyMode::Smooth;
  double tau = 0.0;
  double lambda = 0.0;
  double eta = 0.0;

  static PenaltyConfig smooth(double tau, double eta) { return {PenaltyMode::Smooth, tau, 0.0, eta}; }
  static PenaltyConfig sparse(double tau, double lambda, double eta) {
    return {PenaltyMode::SmoothSparse, tau, lambda, eta};
  }
  void validate() const;
  bool operator==(const PenaltyConfig&) const = default;
};

struct ComponentDiagnostics {
  bool converged = true;
  int iterations = 0;
  std::vector<double> objective_trace;  // penalized quotient after each outer iteration
};

/// Estimated components. Column k of `coeffs` holds the basis coefficients of
/// alpha_k for all p predictors (block j = rows [j*D, (j+1)*D)); column k of
/// `scores` is z * coeffs.col(k), scaled to ||score||^2 / n = 1. Trailing
/// components whose eigenvalue is numerically zero are all-zero.
struct ComponentSet {
  Eigen::MatrixXd coeffs;
  Eigen::VectorXd sigma2;
  Eigen::MatrixXd scores;
  PenaltyConfig config;
  std::vector<ComponentDiagnostics> diagnostics;

  int size() const { return static_cast<int>(sigma2.size()); }
  /// Number of leading components with positive eigenvalue.
  int nonzero() const;
};

struct SparseOptions {
  double tol = 1e-8;       // relative change of the quotient between outer iterations
  int max_iter = 500;      // outer iterations per component
  double inner_tol = 1e-7;   // relative block change ending a descent pass
  int max_sweeps = 2000;   // block coordinate descent sweeps per outer iteration
};

/// min(k_max, m, n - 1, p*D).
int component_cap(const DesignMatrices& dm, int k_max);

/// ||yc' z a||^2 / n^2  divided by  ||z a||^2 / n + P(a).
double penalized_quotient(const DesignMatrices& dm, const PenaltyConfig& config,
                          const Eigen::Ref<const Eigen::VectorXd>& a);

/// (I - t t' / ||t||^2) z. Throws InvalidArgument on a zero score.
Eigen::MatrixXd deflate(const Eigen::MatrixXd& z, const Eigen::Ref<const Eigen::VectorXd>& score);

/// Smooth-penalty components. The numerator has rank <= m, so each
/// component reduces to an m x m symmetric eigenproblem in sample space; the
/// orthogonality constraints against earlier scores are imposed exactly.
/// Precomputation depends only on (design, eta) and is reused across tau.
class SmoothSolver {
 public:
  SmoothSolver(const DesignMatrices& dm, double eta);
  ComponentSet solve(double tau, int k_max) const;

 private:
  const DesignMatrices& dm_;
  double eta_;
  Eigen::MatrixXd metric_;
  Eigen::MatrixXd metric_chol_;  // lower Cholesky factor of the block metric
  bool dense_;
  Eigen::MatrixXd zz_;           // dense route: z'z / n
  Eigen::MatrixXd zw_;           // kernel route: whitened design
  Eigen::MatrixXd kernel_vecs_;  // eigenvectors of zw zw'
  Eigen::VectorXd kernel_vals_;
};

/// Smooth-sparse components by alternating maximization: for fixed a the best
/// direction in response space is u = yc'z a / ||yc'z a||; for fixed u the
/// best a minimizes den(a) - 2 c'a with c = z'yc u / n, solved by block
/// coordinate descent in whitened group coordinates with exact group
/// soft-thresholding. Later components work on the deflated design; their
/// coefficients are mapped back so that scores are z * coeffs.
class SparseSolver {
 public:
  SparseSolver(const DesignMatrices& dm, double eta);
  ComponentSet solve(double tau, double lambda, int k_max, const SparseOptions& opts = {}) const;

 private:
  const DesignMatrices& dm_;
  double eta_;
  Eigen::MatrixXd metric_chol_;
  Eigen::MatrixXd zw_;
  Eigen::MatrixXd kernel_vecs_;
  Eigen::VectorXd kernel_vals_;
  std::vector<Eigen::MatrixXd> block_vecs_;  // eigenvectors of zw_j' zw_j / n, undeflated
  std::vector<Eigen::VectorXd> block_vals_;
};

ComponentSet fit_components_smooth(const DesignMatrices& dm, double tau, double eta, int k_max);
ComponentSet fit_components_sparse(const DesignMatrices& dm, double tau, double lambda, double eta, int k_max,
                                   const SparseOptions& opts = {});
/// Dispatches on config.mode.
ComponentSet fit_components(const DesignMatrices& dm, const PenaltyConfig& config, int k_max);

}  // namespace mvfreg
