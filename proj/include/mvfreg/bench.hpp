#pragma once

#include "mvfreg/eigensolver.hpp"
#include "mvfreg/selection.hpp"
#include "mvfreg/simgen.hpp"

#include <cstdint>
#include <vector>

namespace mvfreg {

/// One table cell: R replicates of a scenario, each with its own model
/// draw, a training set tuned by cross-validation and a test set scored
/// against the true regression function.
struct BenchSettings {
  SimScenario scenario;  // scenario.n is the training size, scenario.seed the master seed
  int n_test = 500;
  int replicates = 20;
  int dim = 30;
  int folds = 5;
  int threads = 1;
  std::vector<PenaltyMode> methods;
};

struct ReplicateOutcome {
  double mspe = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  int K = 0;
  PenaltyConfig config;
  double seconds = 0.0;  // cross-validation plus final fit
};

struct BenchRow {
  PenaltyMode method = PenaltyMode::Smooth;
  std::vector<ReplicateOutcome> replicates;
  double mspe_mean = 0.0;
  double mspe_sd = 0.0;
  double sensitivity_mean = 0.0;
  double specificity_mean = 0.0;
  double k_mean = 0.0;
  double seconds_max = 0.0;
};

/// Master seed of replicate r.
std::uint64_t replicate_seed(std::uint64_t seed, int r);

/// Default methods: the smooth penalty for single-predictor scenarios, the
/// smooth-sparse then the smooth penalty otherwise.
std::vector<PenaltyMode> default_methods(int scenario_id);

ReplicateOutcome run_replicate(const BenchSettings& settings, PenaltyMode method, int r);

/// Replicates run in parallel on settings.threads workers; each method sees
/// the same replicate datasets.
std::vector<BenchRow> run_bench(const BenchSettings& settings);

}  // namespace mvfreg
