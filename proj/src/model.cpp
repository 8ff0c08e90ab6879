#include "mvfreg/model.hpp"

#include "mvfreg/error.hpp"
#include "mvfreg/parallel.hpp"
#include "mvfreg/rng.hpp"
#include "mvfreg/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mvfreg {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Json = nlohmann::ordered_json;

constexpr const char* kModelFormat = "mvfreg-model";
constexpr int kModelFormatVersion = 1;
constexpr double kSelectTolerance = 1e-10;

Json matrix_json(const MatrixXd& a) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (!std::isfinite(a(i, j))) throw NumericalError("model contains non-finite values");
      data.push_back(a(i, j));
    }
  }
  return Json{{"rows", a.rows()}, {"cols", a.cols()}, {"data", std::move(data)}};
}

Json vector_json(const VectorXd& v) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i))) throw NumericalError("model contains non-finite values");
    data.push_back(v(i));
  }
  return data;
}

MatrixXd matrix_from(const Json& j, const char* name, Eigen::Index rows, Eigen::Index cols) {
  if (!j.contains(name)) throw DataError(std::string("model: missing field '") + name + "'");
  const Json& m = j.at(name);
  Eigen::Index r = m.at("rows").get<Eigen::Index>();
  Eigen::Index c = m.at("cols").get<Eigen::Index>();
  if (r != rows || c != cols) {
    throw DataError(std::string("model: field '") + name + "' has shape " + std::to_string(r) + "x" +
                    std::to_string(c) + ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  const Json& data = m.at("data");
  if (static_cast<Eigen::Index>(data.size()) != r * c) throw DataError(std::string("model: field '") + name + "' has wrong length");
  MatrixXd a(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index k = 0; k < c; ++k) a(i, k) = data[static_cast<std::size_t>(i * c + k)].get<double>();
  }
  return a;
}

VectorXd vector_from(const Json& j, const char* name, Eigen::Index size) {
  if (!j.contains(name)) throw DataError(std::string("model: missing field '") + name + "'");
  const Json& data = j.at(name);
  if (static_cast<Eigen::Index>(data.size()) != size) throw DataError(std::string("model: field '") + name + "' has wrong length");
  VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = data[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

Eigen::MatrixXd FittedModel::fitted() const {
  MatrixXd f = components.scores.leftCols(K) * w;
  f.rowwise() += mu.transpose();
  return f;
}

FittedModel fit_from_components(const DesignMatrices& dm, const BasisSpec& spec, const std::vector<double>& grid,
                                const ComponentSet& comps, int K) {
  if (K < 0 || K > comps.size()) {
    throw InvalidArgument("fit: K = " + std::to_string(K) + " exceeds the " + std::to_string(comps.size()) +
                          " available components");
  }
  FittedModel model;
  model.spec = spec;
  model.config = comps.config;
  model.K = K;
  model.p = dm.p;
  model.m = dm.m();
  model.n_train = dm.n();
  model.grid = grid;
  model.xbar = dm.xbar;
  model.mu = dm.ybar;
  model.components.coeffs = comps.coeffs.leftCols(K);
  model.components.sigma2 = comps.sigma2.head(K);
  model.components.scores = comps.scores.leftCols(K);
  model.components.config = comps.config;
  model.components.diagnostics.assign(comps.diagnostics.begin(),
                                      comps.diagnostics.begin() + std::min<std::size_t>(K, comps.diagnostics.size()));
  model.w = model.components.scores.transpose() * dm.yc / static_cast<double>(dm.n());
  return model;
}

FittedModel fit(const CurveDataset& ds, const BasisSpec& spec, const PenaltyConfig& config, int K, int threads) {
  config.validate();
  if (K < 0) throw InvalidArgument("fit: K must be >= 0");
  DesignMatrices dm = build_design(ds, spec, config.eta, threads);
  const int cap = component_cap(dm, K);
  if (cap < K) {
    throw InvalidArgument("fit: K = " + std::to_string(K) + " exceeds min(m, n - 1, p*D) = " +
                          std::to_string(component_cap(dm, dm.m() + dm.n() + dm.width())));
  }
  ComponentSet comps = fit_components(dm, config, K);
  return fit_from_components(dm, spec, ds.grid, comps, K);
}

Eigen::MatrixXd interpolate_curves(const Eigen::MatrixXd& x, int p, const std::vector<double>& from,
                                   const std::vector<double>& to) {
  const Eigen::Index tf = static_cast<Eigen::Index>(from.size());
  const Eigen::Index tt = static_cast<Eigen::Index>(to.size());
  if (tf < 2 || x.cols() != p * tf) throw InvalidArgument("interpolate_curves: curves do not match the source grid");
  for (std::size_t i = 1; i < from.size(); ++i) {
    if (!(from[i] > from[i - 1])) throw InvalidArgument("interpolate_curves: source grid must be strictly increasing");
  }
  const double eps = 1e-12;
  MatrixXd out(x.rows(), p * tt);
  for (Eigen::Index i = 0; i < tt; ++i) {
    double t = to[static_cast<std::size_t>(i)];
    if (t < from.front() - eps || t > from.back() + eps) {
      throw InvalidArgument("prediction grid requires extrapolation: t = " + std::to_string(t) + " lies outside [" +
                            std::to_string(from.front()) + ", " + std::to_string(from.back()) + "]");
    }
    t = std::clamp(t, from.front(), from.back());
    auto it = std::upper_bound(from.begin(), from.end(), t);
    Eigen::Index hi = std::min<Eigen::Index>(it - from.begin(), tf - 1);
    Eigen::Index lo = hi - 1;
    double u = (t - from[lo]) / (from[hi] - from[lo]);
    for (int j = 0; j < p; ++j) {
      out.col(j * tt + i) = (1.0 - u) * x.col(j * tf + lo) + u * x.col(j * tf + hi);
    }
  }
  return out;
}

Eigen::MatrixXd predict(const FittedModel& model, const Eigen::MatrixXd& xnew, const std::vector<double>& grid) {
  const MatrixXd* x = &xnew;
  MatrixXd resampled;
  if (!grid.empty() && grid != model.grid) {
    if (xnew.cols() != static_cast<Eigen::Index>(model.p) * static_cast<Eigen::Index>(grid.size())) {
      throw InvalidArgument("predict: curves have " + std::to_string(xnew.cols()) + " columns, expected p*T = " +
                            std::to_string(model.p * static_cast<int>(grid.size())));
    }
    resampled = interpolate_curves(xnew, model.p, grid, model.grid);
    x = &resampled;
  }
  MatrixXd quad = quadrature_matrix(model.spec, model.grid);
  MatrixXd scores = center_and_score(*x, model.xbar, quad, model.p) * model.components.coeffs.leftCols(model.K);
  MatrixXd out = scores * model.w;
  out.rowwise() += model.mu.transpose();
  return out;
}

std::vector<Eigen::MatrixXd> coefficient_surface(const FittedModel& model, const std::vector<double>& grid) {
  MatrixXd basis = eval_basis(model.spec, grid);
  const int d = model.spec.dim;
  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(model.p));
  for (int j = 0; j < model.p; ++j) {
    if (model.K == 0) {
      out.push_back(MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), model.m));
      continue;
    }
    MatrixXd alpha = basis * model.components.coeffs.block(static_cast<Eigen::Index>(j) * d, 0, d, model.K);
    out.push_back(alpha * model.w);
  }
  return out;
}

std::vector<int> selected_predictors(const FittedModel& model) {
  std::vector<int> out;
  std::vector<int> live;
  for (int k = 0; k < model.K; ++k) {
    if (model.w.row(k).norm() > 0.0) live.push_back(k);
  }
  const int d = model.spec.dim;
  const MatrixXd metric = penalty_metric(model.spec, model.config.eta);
  for (int j = 0; j < model.p; ++j) {
    bool any = false;
    for (int k : live) {
      if (group_norm(model.components.coeffs.block(static_cast<Eigen::Index>(j) * d, k, d, 1), metric) > kSelectTolerance) {
        any = true;
        break;
      }
    }
    if (any) out.push_back(j);
  }
  if (model.config.mode == PenaltyMode::Smooth && !out.empty()) {
    out.resize(static_cast<std::size_t>(model.p));
    for (int j = 0; j < model.p; ++j) out[static_cast<std::size_t>(j)] = j;
  }
  return out;
}

std::string model_to_json(const FittedModel& model) {
  Json j;
  j["format"] = kModelFormat;
  j["format_version"] = kModelFormatVersion;
  j["library_version"] = kVersion;
  j["basis"] = Json{{"degree", model.spec.degree}, {"dim", model.spec.dim}, {"knots", model.spec.knots}};
  j["grid"] = model.grid;
  j["penalty"] = Json{{"mode", to_string(model.config.mode)},
                      {"tau", model.config.tau},
                      {"lambda", model.config.lambda},
                      {"eta", model.config.eta}};
  j["p"] = model.p;
  j["m"] = model.m;
  j["n_train"] = model.n_train;
  j["K"] = model.K;
  j["mu"] = vector_json(model.mu);
  j["w"] = matrix_json(model.w);
  j["coefficients"] = matrix_json(model.components.coeffs);
  j["sigma2"] = vector_json(model.components.sigma2);
  j["scores"] = matrix_json(model.components.scores);
  j["xbar"] = matrix_json(model.xbar);
  Json meta = Json::object();
  for (const auto& [key, value] : model.meta) meta[key] = value;
  j["meta"] = std::move(meta);
  return j.dump(1) + "\n";
}

FittedModel model_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: malformed JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != kModelFormat) throw DataError("model: not a model document");
    if (j.at("format_version").get<int>() != kModelFormatVersion) throw DataError("model: unsupported format version");
    FittedModel model;
    const Json& basis = j.at("basis");
    model.spec = make_basis_from_knots(basis.at("degree").get<int>(), basis.at("knots").get<std::vector<double>>());
    if (model.spec.dim != basis.at("dim").get<int>()) throw DataError("model: basis dimension does not match knots");
    model.grid = j.at("grid").get<std::vector<double>>();
    const Json& pen = j.at("penalty");
    model.config.mode = parse_penalty_mode(pen.at("mode").get<std::string>());
    model.config.tau = pen.at("tau").get<double>();
    model.config.lambda = pen.at("lambda").get<double>();
    model.config.eta = pen.at("eta").get<double>();
    model.config.validate();
    model.p = j.at("p").get<int>();
    model.m = j.at("m").get<int>();
    model.n_train = j.at("n_train").get<int>();
    model.K = j.at("K").get<int>();
    if (model.p < 1 || model.m < 1 || model.n_train < 1 || model.K < 0) throw DataError("model: invalid dimensions");
    const Eigen::Index T = static_cast<Eigen::Index>(model.grid.size());
    const Eigen::Index pd = static_cast<Eigen::Index>(model.p) * model.spec.dim;
    model.mu = vector_from(j, "mu", model.m);
    model.w = matrix_from(j, "w", model.K, model.m);
    model.components.coeffs = matrix_from(j, "coefficients", pd, model.K);
    model.components.sigma2 = vector_from(j, "sigma2", model.K);
    model.components.scores = matrix_from(j, "scores", model.n_train, model.K);
    model.components.config = model.config;
    model.components.diagnostics.assign(static_cast<std::size_t>(model.K), ComponentDiagnostics{});
    model.xbar = matrix_from(j, "xbar", model.p, T);
    if (j.contains("meta")) {
      for (const auto& [key, value] : j.at("meta").items()) {
        model.meta.emplace_back(key, value.is_string() ? value.get<std::string>() : value.dump());
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("model: ") + e.what());
  }
}

void save_model(const FittedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path);
  out << model_to_json(model);
  if (!out) throw DataError("failed writing model file " + path);
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return model_from_json(buf.str());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

double percentile(std::vector<double> values, double prob) {
  if (values.empty()) throw InvalidArgument("percentile: no values");
  if (!(prob >= 0.0 && prob <= 1.0)) throw InvalidArgument("percentile: probability must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  double h = prob * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Refit fixed_refit(const BasisSpec& spec, const PenaltyConfig& config, int K) {
  return [spec, config, K](const CurveDataset& ds) { return fit(ds, spec, config, K); };
}

BootstrapResult bootstrap_intervals(const CurveDataset& ds, const Refit& refit, const Eigen::MatrixXd& xnew,
                                    const BootstrapOptions& opts) {
  if (opts.resamples < 2) throw InvalidArgument("bootstrap: need at least 2 resamples");
  if (!(opts.level >= 0.0 && opts.level < 1.0)) throw InvalidArgument("bootstrap: level must lie in [0, 1)");
  ds.validate();
  const int n = ds.n();
  const int q = static_cast<int>(xnew.rows());
  const int m = ds.m();
  std::vector<MatrixXd> preds(static_cast<std::size_t>(opts.resamples));
  std::vector<int> redraws(static_cast<std::size_t>(opts.resamples), 0);
  parallel_for(static_cast<std::size_t>(opts.resamples), opts.threads, [&](std::size_t b) {
    Rng rng = make_stream(opts.seed, stream::kBootstrap, b);
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (int attempt = 0;; ++attempt) {
      for (auto& r : rows) r = pick(rng);
      bool degenerate = std::all_of(rows.begin(), rows.end(), [&](int r) { return r == rows.front(); });
      if (!degenerate) break;
      if (attempt >= opts.max_redraws) throw NumericalError("bootstrap: too many degenerate resamples");
      ++redraws[b];
    }
    FittedModel model = refit(ds.subset(rows));
    preds[b] = predict(model, xnew);
  });
  BootstrapResult out;
  out.lower.resize(q, m);
  out.upper.resize(q, m);
  const double lo = (1.0 - opts.level) / 2.0;
  const double hi = (1.0 + opts.level) / 2.0;
  std::vector<double> vals(static_cast<std::size_t>(opts.resamples));
  for (int i = 0; i < q; ++i) {
    for (int r = 0; r < m; ++r) {
      for (std::size_t b = 0; b < preds.size(); ++b) vals[b] = preds[b](i, r);
      out.lower(i, r) = percentile(vals, lo);
      out.upper(i, r) = percentile(vals, hi);
    }
  }
  for (int c : redraws) out.redraws += c;
  return out;
}

}  // namespace mvfreg
