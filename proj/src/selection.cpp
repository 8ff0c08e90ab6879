#include "mvfreg/selection.hpp"

#include "mvfreg/error.hpp"
#include "mvfreg/parallel.hpp"
#include "mvfreg/rng.hpp"
#include "mvfreg/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

namespace mvfreg {

namespace {

using Eigen::MatrixXd;
using Json = nlohmann::ordered_json;

constexpr double kRatio = 1e-3;
constexpr double kTieRelative = 1e-12;

// Distinct eta values of the grid in first-appearance order, and for each
// the indices of the cells that use it.
std::vector<std::pair<double, std::vector<int>>> group_by_eta(const std::vector<PenaltyConfig>& grid) {
  std::vector<std::pair<double, std::vector<int>>> out;
  for (int c = 0; c < static_cast<int>(grid.size()); ++c) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& g) { return g.first == grid[c].eta; });
    if (it == out.end()) out.push_back({grid[c].eta, {c}});
    else it->second.push_back(c);
  }
  return out;
}

ComponentSet solve_cell(const SmoothSolver* smooth, const SparseSolver* sparse, const PenaltyConfig& cfg, int k_max,
                        const SparseOptions& opts) {
  if (cfg.mode == PenaltyMode::Smooth) return smooth->solve(cfg.tau, k_max);
  return sparse->solve(cfg.tau, cfg.lambda, k_max, opts);
}

// Candidate (error, cell, k) ordering with the parsimony tie-break.
bool better(double err, const PenaltyConfig& cfg, int k, double best_err, const PenaltyConfig& best, int best_k) {
  if (!std::isfinite(err)) return false;
  if (!std::isfinite(best_err)) return true;
  const double tol = kTieRelative * std::max(std::abs(best_err), std::abs(err));
  if (err < best_err - tol) return true;
  if (err > best_err + tol) return false;
  if (k != best_k) return k < best_k;
  if (cfg.tau != best.tau) return cfg.tau > best.tau;
  if (cfg.eta != best.eta) return cfg.eta > best.eta;
  return cfg.lambda > best.lambda;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

int k_upper(const Eigen::VectorXd& sigma2, int m) {
  if (sigma2.size() == 0) throw InvalidArgument("k_upper: empty eigenvalue sequence");
  if (m < 1) throw InvalidArgument("k_upper: m must be >= 1");
  const int len = static_cast<int>(sigma2.size());
  double sum = sigma2(0);
  for (int k = 2; k <= len; ++k) {
    double s = sigma2(k - 1);
    sum += s;
    bool hit = sum > 0.0 ? s / sum <= kRatio : true;
    if (hit) return std::min(k, m);
  }
  return std::min(m, len);
}

std::vector<PenaltyConfig> smooth_grid() {
  const double taus[] = {1e-9, 1e-6, 1e-3, 1e1, 1e3};
  const double etas[] = {1e-7, 1e-5, 1e-3, 1e-1, 10.0};
  std::vector<PenaltyConfig> g;
  for (double tau : taus) {
    for (double eta : etas) g.push_back(PenaltyConfig::smooth(tau, eta));
  }
  return g;
}

std::vector<PenaltyConfig> sparse_grid() {
  const std::pair<double, double> tl[] = {{0.1, 0.1}, {1.0, 0.2}, {10.0, 0.3}, {100.0, 0.4}};
  const double etas[] = {1e-6, 1e-3, 1.0};
  std::vector<PenaltyConfig> g;
  for (auto [tau, lambda] : tl) {
    for (double eta : etas) g.push_back(PenaltyConfig::sparse(tau, lambda, eta));
  }
  return g;
}

std::vector<int> make_folds(int n, int folds, std::uint64_t seed) {
  if (folds < 2 || folds > n) throw InvalidArgument("make_folds: need 2 <= folds <= n");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_stream(seed, stream::kFolds);
  // Fisher-Yates with an explicit uniform draw keeps the split identical
  // across standard library implementations of std::shuffle.
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  const int base = n / folds;
  const int extra = n % folds;
  int pos = 0;
  for (int f = 0; f < folds; ++f) {
    int size = base + (f < extra ? 1 : 0);
    for (int i = 0; i < size; ++i) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos++)])] = f;
  }
  return fold_of;
}

CvResult cross_validate(const CurveDataset& ds, const BasisSpec& spec, PenaltyMode mode,
                        const std::vector<PenaltyConfig>& grid, const CvOptions& opts) {
  ds.validate();
  if (grid.empty()) throw InvalidArgument("cross_validate: empty tuning grid");
  for (const auto& cfg : grid) {
    cfg.validate();
    if (cfg.mode != mode) throw InvalidArgument("cross_validate: grid cell mode does not match");
  }
  const int n = ds.n();
  const int m = ds.m();
  CvResult res;
  res.mode = mode;
  res.seed = opts.seed;

  if (!opts.fold_of.empty()) {
    if (static_cast<int>(opts.fold_of.size()) != n) throw InvalidArgument("cross_validate: fold assignment length != n");
    int top = *std::max_element(opts.fold_of.begin(), opts.fold_of.end());
    if (*std::min_element(opts.fold_of.begin(), opts.fold_of.end()) < 0 || top < 1) {
      throw InvalidArgument("cross_validate: fold assignment needs indices 0..folds-1 with at least 2 folds");
    }
    res.folds = top + 1;
    res.fold_of = opts.fold_of;
  } else {
    if (opts.folds < 2) throw InvalidArgument("cross_validate: folds must be >= 2");
    if (n < 4) throw InvalidArgument("cross_validate: need at least 4 samples");
    int folds = std::min(opts.folds, n / 2);
    if (folds < opts.folds) {
      res.warnings.push_back("fold count reduced from " + std::to_string(opts.folds) + " to " + std::to_string(folds) +
                             " for n = " + std::to_string(n));
    }
    res.folds = folds;
    res.fold_of = make_folds(n, folds, opts.seed);
  }

  const auto by_eta = group_by_eta(grid);
  const int cells = static_cast<int>(grid.size());
  res.table.resize(static_cast<std::size_t>(cells));
  for (int c = 0; c < cells; ++c) res.table[c].config = grid[c];

  // Step 1: K_upper per cell on the full data.
  {
    DesignMatrices full = build_design(ds, spec, 0.0, opts.threads);
    parallel_for(by_eta.size(), opts.threads, [&](std::size_t g) {
      const double eta = by_eta[g].first;
      std::unique_ptr<SmoothSolver> smooth;
      std::unique_ptr<SparseSolver> sparse;
      if (mode == PenaltyMode::Smooth) smooth = std::make_unique<SmoothSolver>(full, eta);
      else sparse = std::make_unique<SparseSolver>(full, eta);
      for (int c : by_eta[g].second) {
        ComponentSet comps = solve_cell(smooth.get(), sparse.get(), grid[c], m, opts.sparse);
        res.table[c].k_upper = comps.size() == 0 ? 0 : k_upper(comps.sigma2, m);
      }
    });
  }

  // Step 2: fold loop outside, one design per training fold shared by all cells.
  const int folds = res.folds;
  std::vector<std::vector<int>> train(folds), valid(folds);
  for (int i = 0; i < n; ++i) {
    int f = res.fold_of[static_cast<std::size_t>(i)];
    for (int g = 0; g < folds; ++g) (g == f ? valid : train)[g].push_back(i);
  }
  for (int f = 0; f < folds; ++f) {
    if (valid[f].empty() || train[f].size() < 2) throw InvalidArgument("cross_validate: fold " + std::to_string(f) + " is degenerate");
  }
  const MatrixXd quad = quadrature_matrix(spec, ds.grid);
  // errs[f][c][k-1]
  std::vector<std::vector<std::vector<double>>> errs(folds, std::vector<std::vector<double>>(cells));
  std::vector<std::vector<std::string>> notes(folds * by_eta.size());
  std::vector<DesignMatrices> designs(folds);
  std::vector<MatrixXd> vscores(folds);
  std::vector<MatrixXd> vy(folds);
  for (int f = 0; f < folds; ++f) {
    CurveDataset tr = ds.subset(train[f]);
    designs[f] = build_design(tr, spec, 0.0, opts.threads);
    CurveDataset va = ds.subset(valid[f]);
    vscores[f] = center_and_score(va.x, designs[f].xbar, quad, ds.p, opts.threads);
    vy[f] = va.y;
  }
  const std::size_t groups = by_eta.size();
  parallel_for(static_cast<std::size_t>(folds) * groups, opts.threads, [&](std::size_t item) {
    const int f = static_cast<int>(item / groups);
    const std::size_t g = item % groups;
    const DesignMatrices& dm = designs[f];
    const double eta = by_eta[g].first;
    std::unique_ptr<SmoothSolver> smooth;
    std::unique_ptr<SparseSolver> sparse;
    if (mode == PenaltyMode::Smooth) smooth = std::make_unique<SmoothSolver>(dm, eta);
    else sparse = std::make_unique<SparseSolver>(dm, eta);
    for (int c : by_eta[g].second) {
      const int ku = res.table[c].k_upper;
      std::vector<double>& e = errs[f][c];
      e.assign(static_cast<std::size_t>(ku), std::numeric_limits<double>::infinity());
      if (ku == 0) continue;
      ComponentSet comps;
      try {
        comps = solve_cell(smooth.get(), sparse.get(), grid[c], ku, opts.sparse);
      } catch (const NumericalError& ex) {
        notes[item].push_back("fold " + std::to_string(f) + ", cell " + std::to_string(c) + ": " + ex.what());
        continue;
      }
      MatrixXd w = comps.scores.transpose() * dm.yc / static_cast<double>(dm.n());
      MatrixXd s = vscores[f] * comps.coeffs;
      MatrixXd pred = MatrixXd::Zero(vy[f].rows(), m);
      pred.rowwise() += dm.ybar.transpose();
      for (int k = 1; k <= ku; ++k) {
        if (k <= comps.size()) pred.noalias() += s.col(k - 1) * w.row(k - 1);
        e[static_cast<std::size_t>(k - 1)] = (pred - vy[f]).squaredNorm();
      }
    }
  });
  for (const auto& list : notes) res.warnings.insert(res.warnings.end(), list.begin(), list.end());

  // Step 3: totals and the minimizing cell.
  res.best_error = std::numeric_limits<double>::infinity();
  bool found = false;
  for (int c = 0; c < cells; ++c) {
    CvCell& cell = res.table[c];
    cell.errors.assign(static_cast<std::size_t>(cell.k_upper), 0.0);
    for (int k = 0; k < cell.k_upper; ++k) {
      double total = 0.0;
      for (int f = 0; f < folds; ++f) total += errs[f][c][static_cast<std::size_t>(k)];
      cell.errors[static_cast<std::size_t>(k)] = total;
      if (!found || better(total, cell.config, k + 1, res.best_error, res.best, res.best_k)) {
        if (std::isfinite(total)) {
          res.best = cell.config;
          res.best_k = k + 1;
          res.best_error = total;
          found = true;
        }
      }
    }
  }
  if (!found) throw NumericalError("cross-validation: no grid cell produced a finite validation error");
  return res;
}

CvResult cv_small_p(const CurveDataset& ds, const BasisSpec& spec, const CvOptions& opts) {
  return cross_validate(ds, spec, PenaltyMode::Smooth, smooth_grid(), opts);
}

CvResult cv_large_p(const CurveDataset& ds, const BasisSpec& spec, const CvOptions& opts) {
  return cross_validate(ds, spec, PenaltyMode::SmoothSparse, sparse_grid(), opts);
}

std::string cv_result_to_json(const CvResult& r) {
  auto cfg_json = [](const PenaltyConfig& c) {
    return Json{{"tau", c.tau}, {"lambda", c.lambda}, {"eta", c.eta}};
  };
  Json j;
  j["format"] = "mvfreg-cv";
  j["library_version"] = kVersion;
  j["mode"] = to_string(r.mode);
  j["seed"] = r.seed;
  j["folds"] = r.folds;
  j["fold_assignment"] = r.fold_of;
  Json best = cfg_json(r.best);
  best["K"] = r.best_k;
  best["error"] = number_or_null(r.best_error);
  j["best"] = std::move(best);
  Json table = Json::array();
  for (const auto& cell : r.table) {
    Json row = cfg_json(cell.config);
    row["k_upper"] = cell.k_upper;
    Json errors = Json::array();
    for (double e : cell.errors) errors.push_back(number_or_null(e));
    row["errors"] = std::move(errors);
    table.push_back(std::move(row));
  }
  j["table"] = std::move(table);
  j["warnings"] = r.warnings;
  return j.dump(1) + "\n";
}

FittedModel fit_selected(const CurveDataset& ds, const BasisSpec& spec, const CvResult& result, int threads) {
  return fit(ds, spec, result.best, result.best_k, threads);
}

Refit cv_refit(const BasisSpec& spec, PenaltyMode mode, const CvOptions& opts) {
  CvOptions inner = opts;
  inner.threads = 1;
  inner.fold_of.clear();
  return [spec, mode, inner](const CurveDataset& ds) {
    const auto grid = mode == PenaltyMode::Smooth ? smooth_grid() : sparse_grid();
    CvResult r = cross_validate(ds, spec, mode, grid, inner);
    return fit_selected(ds, spec, r);
  };
}

}  // namespace mvfreg
