#include "mvfreg/bench.hpp"

#include "mvfreg/basis.hpp"
#include "mvfreg/metrics.hpp"
#include "mvfreg/model.hpp"
#include "mvfreg/parallel.hpp"

#include <chrono>
#include <cmath>

namespace mvfreg {

std::uint64_t replicate_seed(std::uint64_t seed, int r) {
  Rng rng = make_stream(seed, stream::kReplicate, static_cast<std::uint64_t>(r));
  return rng();
}

std::vector<PenaltyMode> default_methods(int scenario_id) {
  if (scenario_id <= 2) return {PenaltyMode::Smooth};
  return {PenaltyMode::SmoothSparse, PenaltyMode::Smooth};
}

ReplicateOutcome run_replicate(const BenchSettings& settings, PenaltyMode method, int r) {
  SimScenario sc = settings.scenario;
  sc.seed = replicate_seed(settings.scenario.seed, r);
  SimModel model(sc);
  Rng train_curves = make_stream(sc.seed, stream::kCurves);
  Rng train_noise = make_stream(sc.seed, stream::kNoise);
  Rng test_curves = make_stream(sc.seed, stream::kTestCurves);
  Rng test_noise = make_stream(sc.seed, stream::kTestNoise);
  CurveDataset train = model.sample(sc.n, sc.sigma, train_curves, train_noise);
  CurveDataset test = model.sample(settings.n_test, sc.sigma, test_curves, test_noise);

  BasisSpec spec = make_basis(settings.dim);
  CvOptions cv;
  cv.folds = settings.folds;
  cv.seed = sc.seed;
  auto start = std::chrono::steady_clock::now();
  const auto grid = method == PenaltyMode::Smooth ? smooth_grid() : sparse_grid();
  CvResult res = cross_validate(train, spec, method, grid, cv);
  FittedModel fitted = fit_selected(train, spec, res);
  auto stop = std::chrono::steady_clock::now();

  ReplicateOutcome out;
  out.mspe = mspe(predict(fitted, test.x), test.truth->f);
  SensSpec ss = sens_spec(selected_predictors(fitted), train.truth->support, train.p);
  out.sensitivity = ss.sensitivity;
  out.specificity = ss.specificity;
  out.K = fitted.K;
  out.config = fitted.config;
  out.seconds = std::chrono::duration<double>(stop - start).count();
  return out;
}

std::vector<BenchRow> run_bench(const BenchSettings& settings) {
  settings.scenario.validate();
  const auto methods = settings.methods.empty() ? default_methods(settings.scenario.id) : settings.methods;
  const int reps = settings.replicates;
  std::vector<BenchRow> rows(methods.size());
  for (std::size_t i = 0; i < methods.size(); ++i) {
    rows[i].method = methods[i];
    rows[i].replicates.resize(static_cast<std::size_t>(reps));
  }
  parallel_for(methods.size() * static_cast<std::size_t>(reps), settings.threads, [&](std::size_t item) {
    const std::size_t mi = item / static_cast<std::size_t>(reps);
    const int r = static_cast<int>(item % static_cast<std::size_t>(reps));
    rows[mi].replicates[static_cast<std::size_t>(r)] = run_replicate(settings, methods[mi], r);
  });
  for (auto& row : rows) {
    double sum = 0.0, sens = 0.0, spec = 0.0, k = 0.0;
    for (const auto& o : row.replicates) {
      sum += o.mspe;
      sens += o.sensitivity;
      spec += o.specificity;
      k += o.K;
      row.seconds_max = std::max(row.seconds_max, o.seconds);
    }
    row.mspe_mean = sum / reps;
    row.sensitivity_mean = sens / reps;
    row.specificity_mean = spec / reps;
    row.k_mean = k / reps;
    double ss = 0.0;
    for (const auto& o : row.replicates) ss += (o.mspe - row.mspe_mean) * (o.mspe - row.mspe_mean);
    row.mspe_sd = reps > 1 ? std::sqrt(ss / (reps - 1)) : 0.0;
  }
  return rows;
}

}  // namespace mvfreg
