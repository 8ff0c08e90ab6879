#pragma once

#include "mvfreg/basis.hpp"
#include "mvfreg/design.hpp"
#include "mvfreg/eigensolver.hpp"
#include "mvfreg/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mvfreg {

/// min{k > 1 : sigma2_k / (sigma2_1 + ... + sigma2_k) <= 0.001}, capped at m.
/// A 0/0 ratio counts as satisfied. Without such k the result is
/// min(m, sigma2.size()). Throws InvalidArgument on an empty sequence.
int k_upper(const Eigen::VectorXd& sigma2, int m);

/// Penalty grids: 5 x 5 (tau, eta) pairs for the smooth penalty and
/// 4 (tau, lambda) pairs x 3 eta values for the smooth-sparse penalty.
std::vector<PenaltyConfig> smooth_grid();
std::vector<PenaltyConfig> sparse_grid();

struct CvOptions {
  int folds = 5;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Optional explicit fold index per sample (values 0..folds-1). Overrides
  /// the random split when non-empty.
  std::vector<int> fold_of;
  SparseOptions sparse;
};

struct CvCell {
  PenaltyConfig config;
  int k_upper = 0;
  std::vector<double> errors;  // errors[k - 1]: summed validation error with k components
};

struct CvResult {
  PenaltyMode mode = PenaltyMode::Smooth;
  PenaltyConfig best;
  int best_k = 0;
  double best_error = 0.0;
  std::vector<CvCell> table;
  std::uint64_t seed = 0;
  int folds = 0;
  std::vector<int> fold_of;
  std::vector<std::string> warnings;
};

/// Random permutation from `seed` cut into `folds` contiguous blocks whose
/// sizes differ by at most one; returns the fold index of each sample.
std::vector<int> make_folds(int n, int folds, std::uint64_t seed);

/// Grid search: for each cell, K_upper from the full data; then for every
/// fold the validation errors ||Y_pred - Y_val||_F^2 for k = 1..K_upper,
/// summed over folds. The best (cell, K) minimizes the total; near ties
/// (relative 1e-12) prefer smaller K, then larger tau, larger eta and
/// larger lambda.
CvResult cross_validate(const CurveDataset& ds, const BasisSpec& spec, PenaltyMode mode,
                        const std::vector<PenaltyConfig>& grid, const CvOptions& opts);

CvResult cv_small_p(const CurveDataset& ds, const BasisSpec& spec, const CvOptions& opts);
CvResult cv_large_p(const CurveDataset& ds, const BasisSpec& spec, const CvOptions& opts);

/// Deterministic JSON (fixed key order, no timestamps).
std::string cv_result_to_json(const CvResult& result);

/// Refit on the full data at the selected cell and K.
FittedModel fit_selected(const CurveDataset& ds, const BasisSpec& spec, const CvResult& result, int threads = 1);

/// Refit procedure that reruns the whole tuning on each dataset.
Refit cv_refit(const BasisSpec& spec, PenaltyMode mode, const CvOptions& opts);

}  // namespace mvfreg
