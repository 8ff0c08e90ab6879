#include "mvfreg/simgen.hpp"

#include "mvfreg/basis.hpp"
#include "mvfreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace mvfreg {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPi = std::numbers::pi;
constexpr int kFourierTerms = 20;

void fill_normal(MatrixXd& out, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = normal(rng);
  }
}

// Column 2(k-1) holds sin(2k pi t), column 2(k-1)+1 holds cos(2k pi t).
MatrixXd fourier_matrix(const std::vector<double>& grid) {
  MatrixXd f(static_cast<Eigen::Index>(grid.size()), 2 * kFourierTerms);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (int k = 1; k <= kFourierTerms; ++k) {
      f(static_cast<Eigen::Index>(i), 2 * (k - 1)) = std::sin(2.0 * k * kPi * grid[i]);
      f(static_cast<Eigen::Index>(i), 2 * (k - 1) + 1) = std::cos(2.0 * k * kPi * grid[i]);
    }
  }
  return f;
}

// Standard deviation k^{-1/4} of the k-th Fourier coefficient pair (variance 1/sqrt(k)).
double fourier_sd(int column) { return std::pow(static_cast<double>(column / 2 + 1), -0.25); }

double sim3_beta(int j, int k, double t) {
  switch (j) {
    case 0: return std::pow(t, k);
    case 1: return std::cos(k * kPi * t);
    case 2: return 1.0 / (t + k);
    case 3: return std::log(t + k);
    default: return std::exp(-k * t * t);
  }
}

double sim4_beta(int j, int k, double t) {
  switch (j) {
    case 0: return 2.0 * (t + 1.0) * std::exp(-k * t);
    case 1: return std::sin(k * kPi * t / 2.0) / std::sqrt(1.0 + t);
    case 2: return 3.0 * std::sinh(-t) / k + t * t;
    case 3: return 0.5 * std::pow(1.0 + t, k) * std::cos(k * kPi * t);
    default: return std::tan(t) / (1.0 + k * t * t);
  }
}

double sim2_beta(int k, double t) {
  switch (k) {
    case 1: return std::cos(2.0 * kPi * t);
    case 2: return 2.0 * t * t;
    default: return 1.0 / (1.0 + t);
  }
}

// Tail ratios of descending nonnegative eigenvalues.
std::vector<double> tail_ratios(const VectorXd& desc) {
  const Eigen::Index m = desc.size();
  double total = desc.sum();
  std::vector<double> out(static_cast<std::size_t>(m) + 1, 0.0);
  for (Eigen::Index k = 0; k <= m; ++k) out[static_cast<std::size_t>(k)] = desc.tail(m - k).sum() / total;
  return out;
}

// Relative error of the best linear prediction of mu = Bw' Xw from the
// scores beta' Xw, where Xw has covariance c and cross term a = Cov(Xw, mu).
double relative_error(const MatrixXd& beta, const MatrixXd& c, const MatrixXd& a, double total) {
  if (beta.cols() == 0) return 1.0;
  MatrixXd s = beta.transpose() * c * beta;
  MatrixXd cross = beta.transpose() * a;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (s + s.transpose()));
  const VectorXd& ev = es.eigenvalues();
  double top = ev.cwiseAbs().maxCoeff();
  MatrixXd proj = es.eigenvectors().transpose() * cross;
  double explained = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > 1e-13 * top) explained += proj.row(i).squaredNorm() / ev(i);
  }
  return std::max(0.0, (total - explained) / total);
}

VectorXd top_vector(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sym + sym.transpose()));
  return es.eigenvectors().col(sym.rows() - 1);
}

}  // namespace

std::vector<double> uniform_grid(int T) {
  if (T < 2) throw InvalidArgument("grid needs at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (T - 1);
  return g;
}

Eigen::MatrixXd gp_cholesky(const std::vector<double>& grid, double* jitter_used) {
  const Eigen::Index T = static_cast<Eigen::Index>(grid.size());
  MatrixXd k(T, T);
  for (Eigen::Index i = 0; i < T; ++i) {
    for (Eigen::Index j = 0; j < T; ++j) {
      double d = 30.0 * (grid[i] - grid[j]);
      k(i, j) = std::exp(-d * d);
    }
  }
  for (double jitter = 1e-10; jitter <= 1.0; jitter *= 10.0) {
    MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt.matrixL();
    }
  }
  throw NumericalError("Gaussian process covariance could not be factorized");
}

int SimScenario::p() const {
  switch (id) {
    case 3: return 50;
    case 4: return 1000;
    default: return 1;
  }
}

void SimScenario::validate() const {
  if (id < 1 || id > 4) throw InvalidArgument("unknown simulation id " + std::to_string(id) + " (expected 1-4)");
  if (n < 2) throw InvalidArgument("simulation: n must be >= 2");
  if (m < 1) throw InvalidArgument("simulation: m must be >= 1");
  if (!std::isfinite(sigma) || sigma < 0.0) throw InvalidArgument("simulation: sigma must be >= 0");
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("simulation: rho must lie in [0, 1]");
  if (lag < 1) throw InvalidArgument("simulation: lag must be >= 1");
  if (T < 2) throw InvalidArgument("simulation: T must be >= 2");
  if (snr_draws < 2) throw InvalidArgument("simulation: snr_draws must be >= 2");
}

SimModel::SimModel(const SimScenario& sc) : sc_(sc) {
  sc_.validate();
  p_ = sc_.p();
  grid_ = uniform_grid(sc_.T);
  weights_ = trapezoid_weights(grid_);
  const int T = sc_.T;
  const int m = sc_.m;
  Rng mix_rng = make_stream(sc_.seed, stream::kMixing);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  switch (sc_.id) {
    case 1: {
      support_ = {0};
      MatrixXd b(T, m);
      for (int i = 0; i < T; ++i) {
        for (int r = 0; r < m; ++r) {
          double arg = 3.0 * kPi * grid_[i] + (r + 1);
          b(i, r) = std::sin(arg) + std::cos(arg);
        }
      }
      coef_.push_back(b);
      gp_chol_ = gp_cholesky(grid_);
      break;
    }
    case 2: {
      support_ = {0};
      mixing_.resize(m, 3);
      for (int r = 0; r < m; ++r) {
        for (int k = 0; k < 3; ++k) mixing_(r, k) = unif(mix_rng);
      }
      MatrixXd beta(T, 3);
      for (int i = 0; i < T; ++i) {
        for (int k = 1; k <= 3; ++k) beta(i, k - 1) = sim2_beta(k, grid_[i]);
      }
      coef_.push_back(beta * mixing_.transpose());
      fourier_ = fourier_matrix(grid_);
      break;
    }
    default: {
      const bool third = sc_.id == 3;
      mixing_.resize(3, m);
      for (int k = 0; k < 3; ++k) {
        for (int r = 0; r < m; ++r) mixing_(k, r) = unif(mix_rng);
      }
      for (int s = 0; s < 5; ++s) {
        support_.push_back(third ? s : 10 * s);
        MatrixXd beta(T, 3);
        for (int i = 0; i < T; ++i) {
          for (int k = 1; k <= 3; ++k) {
            beta(i, k - 1) = third ? sim3_beta(s, k, grid_[i]) : sim4_beta(s, k, grid_[i]);
          }
        }
        coef_.push_back(beta * mixing_);
      }
      if (third) fourier_ = fourier_matrix(grid_);
      else gp_chol_ = gp_cholesky(grid_);
      break;
    }
  }
  Rng snr_rng = make_stream(sc_.seed, stream::kSnr);
  scale_ = estimate_scale(sc_.snr_draws, snr_rng);
}

Eigen::MatrixXd SimModel::coefficient(int j) const {
  if (j < 0 || j >= p_) throw InvalidArgument("coefficient: predictor index out of range");
  for (std::size_t s = 0; s < support_.size(); ++s) {
    if (support_[s] == j) return coef_[s];
  }
  return MatrixXd::Zero(sc_.T, sc_.m);
}

Eigen::MatrixXd SimModel::draw_curves(int n, Rng& rng) const {
  const int T = sc_.T;
  MatrixXd x(n, static_cast<Eigen::Index>(p_) * T);
  switch (sc_.id) {
    case 1: {
      MatrixXd z(T, n);
      fill_normal(z, rng);
      x = (gp_chol_ * z).transpose();
      break;
    }
    case 2:
    case 3: {
      const int cols = 2 * kFourierTerms;
      const double a = std::sqrt(sc_.rho);
      const double b = std::sqrt(1.0 - sc_.rho);
      std::normal_distribution<double> normal(0.0, 1.0);
      MatrixXd v(cols, p_);
      for (int l = 0; l < n; ++l) {
        for (int c = 0; c < cols; ++c) {
          double sd = fourier_sd(c);
          if (p_ == 1) {
            v(c, 0) = sd * normal(rng);
          } else {
            double common = normal(rng);
            for (int j = 0; j < p_; ++j) v(c, j) = sd * (a * common + b * normal(rng));
          }
        }
        MatrixXd curves = fourier_ * v;  // T x p
        x.row(l) = Eigen::Map<const Eigen::RowVectorXd>(curves.data(), curves.size());
      }
      break;
    }
    default: {
      const int w_count = p_ + sc_.lag;
      const double norm = 1.0 / std::sqrt(static_cast<double>(sc_.lag));
      MatrixXd z(T, w_count);
      for (int l = 0; l < n; ++l) {
        fill_normal(z, rng);
        MatrixXd w = gp_chol_ * z;
        for (int j = 0; j < p_; ++j) {
          VectorXd sum = w.middleCols(j + 1, sc_.lag).rowwise().sum() * norm;
          x.row(l).segment(static_cast<Eigen::Index>(j) * T, T) = sum.transpose();
        }
      }
      break;
    }
  }
  return x;
}

Eigen::MatrixXd SimModel::draw_support_curves(int n, Rng& rng) const {
  const int T = sc_.T;
  const int s_count = static_cast<int>(support_.size());
  if (sc_.id <= 2) return draw_curves(n, rng);
  MatrixXd x(n, static_cast<Eigen::Index>(s_count) * T);
  if (sc_.id == 3) {
    const int cols = 2 * kFourierTerms;
    const double a = std::sqrt(sc_.rho);
    const double b = std::sqrt(1.0 - sc_.rho);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd v(cols, s_count);
    for (int l = 0; l < n; ++l) {
      for (int c = 0; c < cols; ++c) {
        double common = normal(rng);
        for (int s = 0; s < s_count; ++s) v(c, s) = fourier_sd(c) * (a * common + b * normal(rng));
      }
      MatrixXd curves = fourier_ * v;
      x.row(l) = Eigen::Map<const Eigen::RowVectorXd>(curves.data(), curves.size());
    }
    return x;
  }
  // Only the underlying processes feeding the support predictors are drawn.
  std::map<int, int> slot;
  for (int j : support_) {
    for (int l = 1; l <= sc_.lag; ++l) slot.emplace(j + l, 0);
  }
  int next = 0;
  for (auto& kv : slot) kv.second = next++;
  const double norm = 1.0 / std::sqrt(static_cast<double>(sc_.lag));
  MatrixXd z(T, next);
  for (int l = 0; l < n; ++l) {
    fill_normal(z, rng);
    MatrixXd w = gp_chol_ * z;
    for (int s = 0; s < s_count; ++s) {
      VectorXd sum = VectorXd::Zero(T);
      for (int k = 1; k <= sc_.lag; ++k) sum += w.col(slot.at(support_[s] + k));
      x.row(l).segment(static_cast<Eigen::Index>(s) * T, T) = (sum * norm).transpose();
    }
  }
  return x;
}

Eigen::MatrixXd SimModel::unscaled_signal(const Eigen::MatrixXd& support_curves) const {
  const int T = sc_.T;
  MatrixXd out = MatrixXd::Zero(support_curves.rows(), sc_.m);
  for (std::size_t s = 0; s < support_.size(); ++s) {
    const auto xs = support_curves.middleCols(static_cast<Eigen::Index>(s) * T, T);
    out.noalias() += xs * (weights_.asDiagonal() * coef_[s]);
  }
  return out;
}

Eigen::MatrixXd SimModel::regression_function(const Eigen::MatrixXd& x) const {
  const int T = sc_.T;
  if (x.cols() != static_cast<Eigen::Index>(p_) * T) throw InvalidArgument("regression_function: expected p*T columns");
  MatrixXd sup(x.rows(), static_cast<Eigen::Index>(support_.size()) * T);
  for (std::size_t s = 0; s < support_.size(); ++s) {
    sup.middleCols(static_cast<Eigen::Index>(s) * T, T) = x.middleCols(static_cast<Eigen::Index>(support_[s]) * T, T);
  }
  return (scale_ * unscaled_signal(sup)).array() + 1.0;
}

CurveDataset SimModel::sample(int n, double sigma, Rng& curve_rng, Rng& noise_rng) const {
  if (n < 1) throw InvalidArgument("sample: n must be >= 1");
  if (!std::isfinite(sigma) || sigma < 0.0) throw InvalidArgument("sample: sigma must be >= 0");
  CurveDataset ds;
  ds.grid = grid_;
  ds.p = p_;
  ds.x = draw_curves(n, curve_rng);
  MatrixXd f = regression_function(ds.x);
  MatrixXd noise(n, sc_.m);
  fill_normal(noise, noise_rng);
  ds.y = f + sigma * noise;
  ds.truth = CurveTruth{f, support_, scale_, sigma};
  return ds;
}

double scale_from_signal(const Eigen::MatrixXd& signal) {
  if (signal.rows() < 2 || signal.cols() < 1) throw InvalidArgument("scale_from_signal: need at least 2 draws");
  Eigen::RowVectorXd mean = signal.colwise().mean();
  double var = (signal.rowwise() - mean).squaredNorm() / static_cast<double>(signal.rows() - 1) /
               static_cast<double>(signal.cols());
  if (!(var > 0.0) || !std::isfinite(var)) throw InvalidArgument("signal has zero variance; the scale is undefined");
  return 1.0 / std::sqrt(var);
}

double SimModel::estimate_scale(int draws, Rng& rng) const {
  if (draws < 2) throw InvalidArgument("estimate_scale: need at least 2 draws");
  return scale_from_signal(unscaled_signal(draw_support_curves(draws, rng)));
}

CurveDataset generate(const SimScenario& sc) {
  SimModel model(sc);
  Rng curves = make_stream(sc.seed, stream::kCurves);
  Rng noise = make_stream(sc.seed, stream::kNoise);
  return model.sample(sc.n, sc.sigma, curves, noise);
}

CurveDataset gen_sim1(int n, int m, double sigma, std::uint64_t seed) {
  SimScenario sc;
  sc.id = 1;
  sc.n = n;
  sc.m = m;
  sc.sigma = sigma;
  sc.seed = seed;
  return generate(sc);
}

CurveDataset gen_sim2(int n, int m, double sigma, std::uint64_t seed) {
  SimScenario sc;
  sc.id = 2;
  sc.n = n;
  sc.m = m;
  sc.sigma = sigma;
  sc.seed = seed;
  return generate(sc);
}

CurveDataset gen_sim3(int n, int m, double sigma, double rho, std::uint64_t seed) {
  SimScenario sc;
  sc.id = 3;
  sc.n = n;
  sc.m = m;
  sc.sigma = sigma;
  sc.rho = rho;
  sc.seed = seed;
  return generate(sc);
}

CurveDataset gen_sim4(int n, int m, double sigma, int lag, std::uint64_t seed) {
  SimScenario sc;
  sc.id = 4;
  sc.n = n;
  sc.m = m;
  sc.sigma = sigma;
  sc.lag = lag;
  sc.seed = seed;
  return generate(sc);
}

double snr_scale(const SimScenario& sc) { return SimModel(sc).scale(); }

CovCase parse_cov_case(const std::string& s) {
  if (s == "ar" || s == "AR") return CovCase::AR;
  if (s == "cs" || s == "CS") return CovCase::CS;
  throw InvalidArgument("unknown covariance case '" + s + "' (expected ar or cs)");
}

std::vector<double> fig1_curves(int m, CovCase cov, double rho) {
  if (m < 1) throw InvalidArgument("fig1_curves: m must be >= 1");
  if (!std::isfinite(rho)) throw InvalidArgument("fig1_curves: rho must be finite");
  MatrixXd s(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) s(i, j) = 1.0;
      else s(i, j) = cov == CovCase::AR ? std::pow(rho, std::abs(i - j)) : rho;
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
  VectorXd ev = es.eigenvalues().reverse();
  double top = ev.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) {
      if (ev(i) < -1e-12 * top) throw InvalidArgument("fig1_curves: covariance is not positive semidefinite");
      ev(i) = 0.0;
    }
  }
  return tail_ratios(ev);
}

DemoResult brownian_demo(int T, int k_max) {
  if (k_max < 1) throw InvalidArgument("brownian_demo: k_max must be >= 1");
  const int m = 5;
  DemoResult out;
  out.grid = uniform_grid(T);
  const auto& g = out.grid;
  VectorXd w = trapezoid_weights(g);
  VectorXd sw = w.cwiseSqrt();
  MatrixXd c(T, T), b(T, m);
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < T; ++j) c(i, j) = std::min(g[i], g[j]);
    for (int k = 1; k <= m; ++k) b(i, k - 1) = std::sin(k * kPi * g[i]) + 2.0 * std::sin((k + 1) * kPi * g[i]);
  }
  // Weighted coordinates: beta = W^{1/2} alpha turns every integral into a
  // Euclidean inner product.
  MatrixXd ct = sw.asDiagonal() * c * sw.asDiagonal();
  MatrixXd bt = sw.asDiagonal() * b;
  MatrixXd at = ct * bt;  // Cov(Xw, mu)
  const double total = (bt.transpose() * ct * bt).trace();

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(ct);
  const VectorXd& ev = es.eigenvalues();
  const MatrixXd& vec = es.eigenvectors();
  const double top = ev.maxCoeff();
  std::vector<int> keep;
  for (int i = T - 1; i >= 0; --i) {
    if (ev(i) > 1e-12 * top) keep.push_back(i);
  }
  const int r = static_cast<int>(keep.size());
  MatrixXd half_inv(T, r);  // V Lambda^{-1/2} on the range of ct
  for (int i = 0; i < r; ++i) half_inv.col(i) = vec.col(keep[i]) / std::sqrt(ev(keep[i]));

  // Optimal: generalized eigenvectors of (at at', ct) = left singular vectors
  // of Lambda^{-1/2} V' at, mapped back.
  Eigen::JacobiSVD<MatrixXd> svd(half_inv.transpose() * at, Eigen::ComputeThinU);
  const int kk = std::min<int>(k_max, static_cast<int>(svd.matrixU().cols()));
  MatrixXd opt = half_inv * svd.matrixU().leftCols(kk);

  MatrixXd pca(T, k_max);
  for (int k = 0; k < k_max; ++k) pca.col(k) = vec.col(T - 1 - k);

  // FPLS: unit-norm directions maximizing the summed squared covariance,
  // each with scores uncorrelated with the previous ones.
  MatrixXd pls(T, k_max);
  MatrixXd gam = at * at.transpose();
  for (int k = 0; k < k_max; ++k) {
    if (k == 0) {
      pls.col(0) = top_vector(gam);
      continue;
    }
    MatrixXd cons = ct * pls.leftCols(k);
    Eigen::HouseholderQR<MatrixXd> qr(cons);
    MatrixXd q = qr.householderQ();
    MatrixXd null = q.rightCols(T - k);
    pls.col(k) = null * top_vector(null.transpose() * gam * null);
  }

  for (int k = 0; k <= k_max; ++k) {
    out.optimal.push_back(relative_error(opt.leftCols(std::min(k, kk)), ct, at, total));
    out.fpca.push_back(relative_error(pca.leftCols(k), ct, at, total));
    out.fpls.push_back(relative_error(pls.leftCols(k), ct, at, total));
  }
  return out;
}

}  // namespace mvfreg
