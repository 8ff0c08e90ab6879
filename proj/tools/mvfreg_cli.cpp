#include "mvfreg/basis.hpp"
#include "mvfreg/bench.hpp"
#include "mvfreg/error.hpp"
#include "mvfreg/io.hpp"
#include "mvfreg/model.hpp"
#include "mvfreg/parallel.hpp"
#include "mvfreg/selection.hpp"
#include "mvfreg/simgen.hpp"
#include "mvfreg/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace mvfreg;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Common {
  int threads = default_threads();
  std::uint64_t seed = 1;
};

std::vector<std::string> header_lines(const std::string& command, std::uint64_t seed, const std::string& config) {
  return {std::string("mvfreg ") + kVersion, "command: " + command, "seed: " + std::to_string(seed),
          "config: " + config};
}

std::string kv(const std::string& key, const std::string& value) { return key + "=" + value; }
std::string kv(const std::string& key, double value) { return key + "=" + format_double(value); }
std::string kv(const std::string& key, long long value) { return key + "=" + std::to_string(value); }

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : " ") + p;
  return out;
}

// Writes to `path`, or stdout for "-".
void emit(const std::string& path, const std::string& text) {
  if (path == "-") std::cout << text;
  else write_text(path, text);
}

std::string csv_text(const std::vector<std::string>& header, const std::string& columns,
                     const std::vector<std::string>& rows) {
  std::ostringstream out;
  for (const auto& h : header) out << "# " << h << '\n';
  out << columns << '\n';
  for (const auto& r : rows) out << r << '\n';
  return out.str();
}

// --- simulate -------------------------------------------------------------

struct SimulateArgs {
  SimScenario sc;
  std::string out = "sim";
};

void add_simulate(CLI::App& app, SimulateArgs& a, Common& c) {
  auto* cmd = app.add_subcommand("simulate", "Generate a simulated dataset");
  cmd->add_option("--sim", a.sc.id, "Scenario id")->check(CLI::IsMember({1, 2, 3, 4}))->required();
  cmd->add_option("--n", a.sc.n, "Number of samples")->capture_default_str();
  cmd->add_option("--m", a.sc.m, "Response dimension")->capture_default_str();
  cmd->add_option("--sigma", a.sc.sigma, "Noise standard deviation")->capture_default_str();
  cmd->add_option("--rho", a.sc.rho, "Cross-curve correlation (scenario 3)")->capture_default_str();
  cmd->add_option("--lag", a.sc.lag, "Moving-sum length (scenario 4)")->capture_default_str();
  cmd->add_option("--grid-points", a.sc.T, "Number of grid points")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", a.out, "Output file prefix")->capture_default_str();
}

int run_simulate(SimulateArgs& a, const Common& c) {
  a.sc.seed = c.seed;
  CurveDataset ds = generate(a.sc);
  std::string config = join({kv("sim", static_cast<long long>(a.sc.id)), kv("n", static_cast<long long>(a.sc.n)),
                             kv("m", static_cast<long long>(a.sc.m)), kv("sigma", a.sc.sigma), kv("rho", a.sc.rho),
                             kv("lag", static_cast<long long>(a.sc.lag)), kv("T", static_cast<long long>(a.sc.T)),
                             kv("p", static_cast<long long>(a.sc.p()))});
  write_dataset(a.out, ds, header_lines("simulate", c.seed, config));
  const DatasetFiles f = dataset_files(a.out);
  std::cerr << "wrote " << f.grid << ", " << f.curves << ", " << f.responses << ", " << f.truth << "\n";
  return 0;
}

// --- cv -------------------------------------------------------------------

struct CvArgs {
  std::string data;
  std::string mode = "smooth";
  int folds = 5;
  int dim = 30;
  int degree = 3;
  std::string model_out = "model.json";
  std::string cv_out = "cv.json";
};

void add_cv(CLI::App& app, CvArgs& a, Common& c) {
  auto* cmd = app.add_subcommand("cv", "Tune by cross-validation and fit the selected model");
  cmd->add_option("--data", a.data, "Dataset file prefix")->required();
  cmd->add_option("--mode", a.mode, "Penalty: smooth or sparse")
      ->check(CLI::IsMember({"smooth", "sparse", "smooth-sparse"}))
      ->capture_default_str();
  cmd->add_option("--folds", a.folds, "Number of folds")->capture_default_str();
  cmd->add_option("--dim", a.dim, "B-spline basis dimension")->capture_default_str();
  cmd->add_option("--degree", a.degree, "B-spline degree")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Fold split seed")->capture_default_str();
  cmd->add_option("--model", a.model_out, "Output model JSON")->capture_default_str();
  cmd->add_option("--cv-out", a.cv_out, "Output cross-validation JSON")->capture_default_str();
}

int run_cv(const CvArgs& a, const Common& c) {
  CurveDataset ds = read_dataset(a.data);
  BasisSpec spec = make_basis(a.dim, a.degree);
  PenaltyMode mode = parse_penalty_mode(a.mode);
  CvOptions opts;
  opts.folds = a.folds;
  opts.seed = c.seed;
  opts.threads = c.threads;
  const auto grid = mode == PenaltyMode::Smooth ? smooth_grid() : sparse_grid();
  CvResult res = cross_validate(ds, spec, mode, grid, opts);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  FittedModel model = fit_selected(ds, spec, res, c.threads);
  std::string config = join({kv("data", a.data), kv("mode", to_string(mode)), kv("folds", static_cast<long long>(a.folds)),
                             kv("dim", static_cast<long long>(a.dim)), kv("degree", static_cast<long long>(a.degree))});
  model.meta = {{"library_version", kVersion}, {"seed", std::to_string(c.seed)}, {"config", config}};
  save_model(model, a.model_out);

  auto doc = nlohmann::ordered_json::parse(cv_result_to_json(res));
  doc["run"] = nlohmann::ordered_json{{"command", "cv"}, {"config", config}};
  emit(a.cv_out, doc.dump(1) + "\n");
  std::cerr << "selected tau=" << format_double(res.best.tau) << " lambda=" << format_double(res.best.lambda)
            << " eta=" << format_double(res.best.eta) << " K=" << res.best_k << "\n";
  return 0;
}

// --- predict / bootstrap ----------------------------------------------------

struct CurveInput {
  std::string curves;
  std::string grid;
};

Eigen::MatrixXd load_new_curves(const CurveInput& in, const FittedModel& model, std::vector<double>& grid) {
  grid = in.grid.empty() ? model.grid : read_grid(in.grid);
  int p = 0;
  Eigen::MatrixXd x = read_curves(in.curves, static_cast<int>(grid.size()), &p);
  if (p != model.p) {
    throw DataError(in.curves + ": " + std::to_string(p) + " curves per sample but the model has p = " +
                    std::to_string(model.p));
  }
  return x;
}

struct PredictArgs {
  std::string model;
  CurveInput input;
  std::string out = "-";
};

void add_predict(CLI::App& app, PredictArgs& a) {
  auto* cmd = app.add_subcommand("predict", "Predict responses for new curves");
  cmd->add_option("--model", a.model, "Model JSON")->required();
  cmd->add_option("--curves", a.input.curves, "Curves CSV (long form)")->required();
  cmd->add_option("--grid", a.input.grid, "Grid CSV of the new curves (default: training grid)");
  cmd->add_option("--out", a.out, "Output CSV, '-' for stdout")->capture_default_str();
}

std::vector<std::string> response_columns(int m) {
  std::vector<std::string> cols;
  for (int r = 0; r < m; ++r) cols.push_back("y" + std::to_string(r));
  return cols;
}

int run_predict(const PredictArgs& a, const Common& c) {
  FittedModel model = load_model(a.model);
  std::vector<double> grid;
  Eigen::MatrixXd x = load_new_curves(a.input, model, grid);
  Eigen::MatrixXd pred = predict(model, x, grid);
  auto header = header_lines("predict", c.seed, join({kv("model", a.model), kv("curves", a.input.curves)}));
  std::vector<std::string> rows;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    std::string row = std::to_string(i);
    for (Eigen::Index r = 0; r < pred.cols(); ++r) row += "," + format_double(pred(i, r));
    rows.push_back(row);
  }
  std::string cols = "sample_id";
  for (const auto& col : response_columns(model.m)) cols += "," + col;
  emit(a.out, csv_text(header, cols, rows));
  return 0;
}

struct BootstrapArgs {
  std::string data;
  std::string model;
  CurveInput input;
  int resamples = 1000;
  double level = 0.95;
  bool retune = false;
  int folds = 5;
  std::string out = "-";
};

void add_bootstrap(CLI::App& app, BootstrapArgs& a, Common& c) {
  auto* cmd = app.add_subcommand("bootstrap", "Percentile bootstrap prediction intervals");
  cmd->add_option("--data", a.data, "Training dataset prefix")->required();
  cmd->add_option("--model", a.model, "Model JSON giving penalty, K and basis")->required();
  cmd->add_option("--curves", a.input.curves, "Curves CSV of the new samples")->required();
  cmd->add_option("--grid", a.input.grid, "Grid CSV of the new curves (default: training grid)");
  cmd->add_option("--resamples", a.resamples, "Number of bootstrap resamples")->capture_default_str();
  cmd->add_option("--level", a.level, "Interval level")->capture_default_str();
  cmd->add_flag("--retune", a.retune, "Rerun cross-validation inside every resample");
  cmd->add_option("--folds", a.folds, "Folds used with --retune")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Resampling seed")->capture_default_str();
  cmd->add_option("--out", a.out, "Output CSV, '-' for stdout")->capture_default_str();
}

int run_bootstrap(const BootstrapArgs& a, const Common& c) {
  FittedModel model = load_model(a.model);
  CurveDataset ds = read_dataset(a.data);
  if (ds.p != model.p || ds.m() != model.m) throw DataError(a.data + ": dataset shape does not match the model");
  std::vector<double> grid;
  Eigen::MatrixXd x = load_new_curves(a.input, model, grid);
  if (grid != model.grid) x = interpolate_curves(x, model.p, grid, model.grid);
  if (ds.grid != model.grid) throw DataError(a.data + ": dataset grid differs from the model's training grid");
  BootstrapOptions opts;
  opts.resamples = a.resamples;
  opts.level = a.level;
  opts.seed = c.seed;
  opts.threads = c.threads;
  Refit refit;
  if (a.retune) {
    CvOptions cv;
    cv.folds = a.folds;
    cv.seed = c.seed;
    refit = cv_refit(model.spec, model.config.mode, cv);
  } else {
    refit = fixed_refit(model.spec, model.config, model.K);
  }
  BootstrapResult res = bootstrap_intervals(ds, refit, x, opts);
  if (res.redraws > 0) std::cerr << "redrew " << res.redraws << " degenerate resamples\n";
  std::string config = join({kv("data", a.data), kv("model", a.model), kv("resamples", static_cast<long long>(a.resamples)),
                             kv("level", a.level), kv("retune", a.retune ? "true" : "false")});
  std::vector<std::string> rows;
  for (Eigen::Index i = 0; i < res.lower.rows(); ++i) {
    for (Eigen::Index r = 0; r < res.lower.cols(); ++r) {
      rows.push_back(std::to_string(i) + "," + std::to_string(r) + "," + format_double(res.lower(i, r)) + "," +
                     format_double(res.upper(i, r)));
    }
  }
  emit(a.out, csv_text(header_lines("bootstrap", c.seed, config), "sample_id,response,lower,upper", rows));
  return 0;
}

// --- demo -------------------------------------------------------------------

struct DemoArgs {
  int figure = 1;
  std::string cov = "cs";
  double rho = 0.5;
  int m = 20;
  int grid_points = 64;
  std::string out = "-";
};

void add_demo(CLI::App& app, DemoArgs& a) {
  auto* cmd = app.add_subcommand("demo", "Population-level decomposition demos");
  cmd->add_option("--figure", a.figure, "1: eigenvalue tails, 2: Brownian-motion comparison")
      ->check(CLI::IsMember({1, 2}))
      ->required();
  cmd->add_option("--case", a.cov, "Covariance for figure 1: ar or cs")
      ->check(CLI::IsMember({"ar", "cs"}))
      ->capture_default_str();
  cmd->add_option("--rho", a.rho, "Correlation for figure 1")->capture_default_str();
  cmd->add_option("--m", a.m, "Response dimension for figure 1")->capture_default_str();
  cmd->add_option("--grid-points", a.grid_points, "Grid size for figure 2")->capture_default_str();
  cmd->add_option("--out", a.out, "Output CSV, '-' for stdout")->capture_default_str();
}

int run_demo(const DemoArgs& a, const Common& c) {
  std::vector<std::string> rows;
  if (a.figure == 1) {
    auto err = fig1_curves(a.m, parse_cov_case(a.cov), a.rho);
    for (std::size_t k = 0; k < err.size(); ++k) rows.push_back(std::to_string(k) + "," + format_double(err[k]));
    std::string config = join({kv("figure", 1LL), kv("case", a.cov), kv("rho", a.rho), kv("m", static_cast<long long>(a.m))});
    emit(a.out, csv_text(header_lines("demo", c.seed, config), "K,relative_error", rows));
    return 0;
  }
  DemoResult d = brownian_demo(a.grid_points, 5);
  for (std::size_t k = 0; k < d.optimal.size(); ++k) {
    rows.push_back(std::to_string(k) + "," + format_double(d.optimal[k]) + "," + format_double(d.fpca[k]) + "," +
                   format_double(d.fpls[k]));
  }
  std::string config = join({kv("figure", 2LL), kv("grid_points", static_cast<long long>(a.grid_points))});
  emit(a.out, csv_text(header_lines("demo", c.seed, config), "K,optimal,fpca,fpls", rows));
  return 0;
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
  SimScenario sc;
  int reps = 20;
  int n_test = 500;
  int dim = 30;
  std::vector<std::string> methods;
  bool full = false;
  std::string out = "-";
};

void add_bench(CLI::App& app, BenchArgs& a, Common& c) {
  auto* cmd = app.add_subcommand("bench", "Replicated simulation benchmark, one CSV row per method");
  cmd->add_option("--sim", a.sc.id, "Scenario id")->check(CLI::IsMember({1, 2, 3, 4}))->required();
  cmd->add_option("--n", a.sc.n, "Training size")->capture_default_str();
  cmd->add_option("--n-test", a.n_test, "Test size")->capture_default_str();
  cmd->add_option("--m", a.sc.m, "Response dimension")->capture_default_str();
  cmd->add_option("--sigma", a.sc.sigma, "Noise standard deviation")->capture_default_str();
  cmd->add_option("--rho", a.sc.rho, "Cross-curve correlation (scenario 3)")->capture_default_str();
  cmd->add_option("--lag", a.sc.lag, "Moving-sum length (scenario 4)")->capture_default_str();
  cmd->add_option("--reps", a.reps, "Replicates")->capture_default_str();
  cmd->add_option("--dim", a.dim, "B-spline basis dimension")->capture_default_str();
  cmd->add_option("--methods", a.methods, "Penalties to compare (smooth, sparse)")
      ->check(CLI::IsMember({"smooth", "sparse", "smooth-sparse"}));
  cmd->add_flag("--full", a.full, "All sigma x m cells with 100 replicates");
  cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  cmd->add_option("--out", a.out, "Output CSV, '-' for stdout")->capture_default_str();
}

int run_bench_cmd(BenchArgs& a, const Common& c) {
  std::vector<std::pair<double, int>> cells;
  int reps = a.reps;
  if (a.full) {
    reps = 100;
    for (double s : {0.01, 0.1, 1.0}) {
      for (int m : {1, 5, 10}) cells.emplace_back(s, m);
    }
  } else {
    cells.emplace_back(a.sc.sigma, a.sc.m);
  }
  std::vector<PenaltyMode> methods;
  for (const auto& s : a.methods) methods.push_back(parse_penalty_mode(s));
  const double knob = a.sc.id == 4 ? a.sc.lag : a.sc.rho;
  std::vector<std::string> rows;
  for (auto [sigma, m] : cells) {
    BenchSettings bs;
    bs.scenario = a.sc;
    bs.scenario.sigma = sigma;
    bs.scenario.m = m;
    bs.scenario.seed = c.seed;
    bs.n_test = a.n_test;
    bs.replicates = reps;
    bs.dim = a.dim;
    bs.threads = c.threads;
    bs.methods = methods;
    for (const auto& row : run_bench(bs)) {
      rows.push_back(std::to_string(a.sc.id) + "," + format_double(knob) + "," + format_double(sigma) + "," +
                     std::to_string(m) + "," + to_string(row.method) + "," + std::to_string(reps) + "," +
                     format_double(row.mspe_mean) + "," + format_double(row.mspe_sd) + "," +
                     format_double(row.sensitivity_mean) + "," + format_double(row.specificity_mean) + "," +
                     format_double(row.k_mean));
    }
  }
  std::string config = join({kv("sim", static_cast<long long>(a.sc.id)), kv("n", static_cast<long long>(a.sc.n)),
                             kv("n_test", static_cast<long long>(a.n_test)), kv("rho", a.sc.rho),
                             kv("lag", static_cast<long long>(a.sc.lag)), kv("dim", static_cast<long long>(a.dim)),
                             kv("reps", static_cast<long long>(reps)), kv("full", a.full ? "true" : "false")});
  emit(a.out, csv_text(header_lines("bench", c.seed, config),
                       "sim,knob,sigma,m,method,reps,mspe_mean,mspe_sd,sensitivity,specificity,k_mean", rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate-response scalar-on-function regression"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "Configuration file (TOML-style key = value, [subcommand] sections)");
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads")->capture_default_str();

  SimulateArgs sim;
  CvArgs cv;
  PredictArgs pred;
  BootstrapArgs boot;
  DemoArgs demo;
  BenchArgs bench;
  add_simulate(app, sim, common);
  add_cv(app, cv, common);
  add_predict(app, pred);
  add_bootstrap(app, boot, common);
  add_demo(app, demo);
  add_bench(app, bench, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (common.threads < 1) common.threads = 1;

  try {
    if (app.got_subcommand("simulate")) return run_simulate(sim, common);
    if (app.got_subcommand("cv")) return run_cv(cv, common);
    if (app.got_subcommand("predict")) return run_predict(pred, common);
    if (app.got_subcommand("bootstrap")) return run_bootstrap(boot, common);
    if (app.got_subcommand("demo")) return run_demo(demo, common);
    if (app.got_subcommand("bench")) return run_bench_cmd(bench, common);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
