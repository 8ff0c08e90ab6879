#include "mvfreg/eigensolver.hpp"

#include "mvfreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>

namespace mvfreg {

namespace {

// Eigenvalues below this fraction of the first one are treated as zero.
constexpr double kNullRelative = 1e-12;
// Kernel eigenvalues below this fraction of the largest belong to the null
// space of z' and carry no information.
constexpr double kKernelRelative = 1e-12;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd lower_cholesky(const MatrixXd& metric) {
  Eigen::LLT<MatrixXd> llt(metric);
  if (llt.info() != Eigen::Success) throw NumericalError("penalty metric G + eta H is not positive definite");
  return llt.matrixL();
}

// zw_j = z_j L^{-T}, so that z_j a_j = zw_j x_j with x_j = L' a_j and
// ||a_j||_eta = ||x_j||.
MatrixXd whiten_blocks(const MatrixXd& z, const MatrixXd& chol, int p, int d) {
  MatrixXd zw(z.rows(), z.cols());
  auto lower = chol.triangularView<Eigen::Lower>();
  for (int j = 0; j < p; ++j) {
    const Index c = static_cast<Index>(j) * d;
    zw.middleCols(c, d) = lower.solve(z.middleCols(c, d).transpose()).transpose();
  }
  return zw;
}

VectorXd unwhiten(const VectorXd& x, const MatrixXd& chol, int p, int d) {
  VectorXd a(x.size());
  auto upper = chol.transpose().triangularView<Eigen::Upper>();
  for (int j = 0; j < p; ++j) {
    const Index c = static_cast<Index>(j) * d;
    a.segment(c, d) = upper.solve(x.segment(c, d));
  }
  return a;
}

struct TopPair {
  double value = 0.0;
  VectorXd vector;
};

TopPair top_eigenpair(MatrixXd sym) {
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  const Index last = sym.rows() - 1;
  return {es.eigenvalues()(last), es.eigenvectors().col(last)};
}

// Entry of largest magnitude in yc' t made positive.
void fix_sign(VectorXd& coef, VectorXd& score, const MatrixXd& yc) {
  VectorXd cov = yc.transpose() * score;
  Index idx = 0;
  cov.cwiseAbs().maxCoeff(&idx);
  if (cov(idx) < 0.0) {
    coef = -coef;
    score = -score;
  }
}

ComponentSet empty_set(const DesignMatrices& dm, int cap, const PenaltyConfig& config) {
  ComponentSet out;
  out.coeffs = MatrixXd::Zero(dm.width(), cap);
  out.sigma2 = VectorXd::Zero(cap);
  out.scores = MatrixXd::Zero(dm.n(), cap);
  out.config = config;
  out.diagnostics.assign(static_cast<std::size_t>(cap), ComponentDiagnostics{});
  return out;
}

// Sequential constrained maximization in sample space. With a = B^{-1} z' v
// (B = z'z/n + P) every quantity is expressed through H = z B^{-1} z':
//   score z a = H v,  a'B a = v'H v,  numerator ||yc' H v||^2 / n^2.
// The constraints T' z a = 0 against earlier scores T restrict v through the
// H-oblique projector, giving the m x m problem
//   yc' [H - H T (T'H T)^{-1} T'H] yc / n^2.
ComponentSet sequential_components(const DesignMatrices& dm, const MatrixXd& h,
                                   const std::function<VectorXd(const VectorXd&)>& coef_map, int cap,
                                   const PenaltyConfig& config) {
  const int n = dm.n();
  const double n2 = static_cast<double>(n) * n;
  ComponentSet out = empty_set(dm, cap, config);
  const MatrixXd hy = h * dm.yc;
  const MatrixXd base = dm.yc.transpose() * hy;
  MatrixXd scores(n, 0);
  double first = -1.0;
  for (int k = 0; k < cap; ++k) {
    MatrixXd f = base;
    MatrixXd e, gk;
    Eigen::LDLT<MatrixXd> tht;
    if (k > 0) {
      e = h * scores;
      tht.compute(scores.transpose() * e);
      gk = e.transpose() * dm.yc;
      f -= gk.transpose() * tht.solve(gk);
    }
    f /= n2;
    TopPair top = top_eigenpair(f);
    if (!(top.value > 0.0)) break;
    if (first < 0.0) first = top.value;
    if (top.value <= kNullRelative * first) break;
    VectorXd v = dm.yc * top.vector;
    if (k > 0) v -= scores * tht.solve(gk * top.vector);
    VectorXd a = coef_map(v);
    VectorXd t = dm.z * a;
    double var = t.squaredNorm() / n;
    if (!(var > 0.0)) break;
    double s = 1.0 / std::sqrt(var);
    a *= s;
    t *= s;
    fix_sign(a, t, dm.yc);
    out.coeffs.col(k) = a;
    out.scores.col(k) = t;
    out.sigma2(k) = top.value;
    scores.conservativeResize(Eigen::NoChange, k + 1);
    scores.col(k) = t;
  }
  return out;
}

// Minimizes x'(Q + tau I)x - 2 b'x + 2 s ||x|| with Q = V diag(lam) V'.
// Zero iff ||b|| <= s; otherwise x = (Q + mu I)^{-1} b where mu > tau solves
// (mu - tau) ||(Q + mu I)^{-1} b|| = s, which is increasing in mu.
VectorXd solve_group(const MatrixXd& vecs, const VectorXd& vals, const VectorXd& b, double tau, double s) {
  const double bnorm = b.norm();
  if (bnorm <= s || bnorm == 0.0) return VectorXd::Zero(b.size());
  VectorXd bt = vecs.transpose() * b;
  VectorXd lam = vals.cwiseMax(0.0);
  if (s <= 0.0) return vecs * (bt.array() / (lam.array() + tau)).matrix();
  auto radius = [&](double mu) { return (bt.array() / (lam.array() + mu)).matrix().norm(); };
  auto psi = [&](double mu) { return (mu - tau) * radius(mu) - s; };
  double lo = tau;
  double hi = (s * lam.maxCoeff() + tau * bnorm) / (bnorm - s) + tau;
  hi = std::max(hi, tau + s / bnorm);
  while (psi(hi) < 0.0) hi = 2.0 * hi + 1.0;
  double mu = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double r = radius(mu);
    double val = (mu - tau) * r - s;
    if (val > 0.0) hi = mu; else lo = mu;
    double dr = -(bt.array().square() / (lam.array() + mu).cube()).sum() / r;
    double dpsi = r + (mu - tau) * dr;
    double next = mu - val / dpsi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - mu) <= 1e-15 * std::max(1.0, mu)) {
      mu = next;
      break;
    }
    mu = next;
  }
  return vecs * (bt.array() / (lam.array() + mu)).matrix();
}

// Per-block eigendecompositions of zw_j' zw_j / n, computed on first use.
// Blocks that stay at zero never need one.
struct BlockEigens {
  const MatrixXd* zw = nullptr;
  int d = 0;
  std::vector<MatrixXd> vecs;
  std::vector<VectorXd> vals;
  std::vector<char> ready;

  void reset(const MatrixXd& design, int p, int dim) {
    zw = &design;
    d = dim;
    vecs.assign(p, MatrixXd());
    vals.assign(p, VectorXd());
    ready.assign(p, 0);
  }
  void compute(int j) {
    const auto zj = zw->middleCols(static_cast<Index>(j) * d, d);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(zj.transpose() * zj / static_cast<double>(zw->rows()));
    vecs[j] = es.eigenvectors();
    vals[j] = es.eigenvalues().cwiseMax(0.0);
    ready[j] = 1;
  }
  void compute_all() {
    for (int j = 0; j < static_cast<int>(ready.size()); ++j) compute(j);
  }
};

struct GroupState {
  const MatrixXd& zw;
  const std::vector<MatrixXd>* base_vecs;  // precomputed for the undeflated design, or null
  const std::vector<VectorXd>* base_vals;
  BlockEigens& own;
  int p;
  int d;
  int n;
  double tau;
  double lambda;
  VectorXd x;
  VectorXd z;       // zw x
  VectorXd norms;   // ||x_j||

  void eig(int j, const MatrixXd*& v, const VectorXd*& l) {
    if (base_vecs) {
      v = &(*base_vecs)[j];
      l = &(*base_vals)[j];
      return;
    }
    if (!own.ready[j]) own.compute(j);
    v = &own.vecs[j];
    l = &own.vals[j];
  }
  void refresh() {
    z = zw * x;
    for (int j = 0; j < p; ++j) norms(j) = x.segment(static_cast<Index>(j) * d, d).norm();
  }
  double denominator() const {
    double l1 = norms.sum();
    return z.squaredNorm() / n + tau * (1.0 - lambda) * norms.squaredNorm() + tau * lambda * l1 * l1;
  }
  void scale(double s) {
    x *= s;
    z *= s;
    norms *= std::abs(s);
  }
};

double quotient(const GroupState& st, const MatrixXd& yc) {
  double den = st.denominator();
  if (!(den > 0.0)) return 0.0;
  double num = (yc.transpose() * st.z).squaredNorm() / (static_cast<double>(st.n) * st.n);
  return num / den;
}

// Block coordinate descent on den(x) - 2 c'x. Each block update is an exact
// minimization, so the objective never increases. Sweeps run over the
// nonzero blocks; once they settle, zero blocks are screened with their
// optimality condition and violators join the active set.
void block_descent(GroupState& st, const VectorXd& c, const SparseOptions& opts) {
  const int d = st.d;
  double total = st.norms.sum();
  auto update = [&](int j) {
    const Index off = static_cast<Index>(j) * d;
    const auto zj = st.zw.middleCols(off, d);
    const double rest = std::max(total - st.norms(j), 0.0);
    const double s = st.tau * st.lambda * rest;
    VectorXd b = c.segment(off, d) - zj.transpose() * st.z / st.n;
    const bool was_zero = st.norms(j) == 0.0;
    if (was_zero && b.norm() <= s) return 0.0;
    const MatrixXd* v = nullptr;
    const VectorXd* lam = nullptr;
    st.eig(j, v, lam);
    VectorXd xj = st.x.segment(off, d);
    if (!was_zero) b += *v * (lam->array() * (v->transpose() * xj).array()).matrix();
    VectorXd xn = solve_group(*v, *lam, b, st.tau, s);
    VectorXd dx = xn - xj;
    double change = dx.norm();
    if (change == 0.0) return 0.0;
    st.z.noalias() += zj * dx;
    double nn = xn.norm();
    total += nn - st.norms(j);
    st.norms(j) = nn;
    st.x.segment(off, d) = xn;
    return change;
  };
  std::vector<int> active;
  for (int j = 0; j < st.p; ++j) {
    if (st.norms(j) > 0.0) active.push_back(j);
  }
  if (active.empty()) {
    for (int j = 0; j < st.p; ++j) active.push_back(j);
  }
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double change = 0.0;
    for (int j : active) change = std::max(change, update(j));
    total = st.norms.sum();
    std::erase_if(active, [&](int j) { return st.norms(j) == 0.0; });
    if (change > opts.inner_tol * std::max(st.x.norm(), std::numeric_limits<double>::min())) continue;
    VectorXd g = st.zw.transpose() * st.z / st.n;
    const double s = st.tau * st.lambda * total;
    std::vector<int> violators;
    for (int j = 0; j < st.p; ++j) {
      if (st.norms(j) > 0.0) continue;
      const Index off = static_cast<Index>(j) * d;
      if ((c.segment(off, d) - g.segment(off, d)).norm() > s) violators.push_back(j);
    }
    if (violators.empty()) break;
    active.insert(active.end(), violators.begin(), violators.end());
    std::sort(active.begin(), active.end());
  }
}

}  // namespace

std::string to_string(PenaltyMode mode) { return mode == PenaltyMode::Smooth ? "smooth" : "smooth-sparse"; }

PenaltyMode parse_penalty_mode(const std::string& s) {
  if (s == "smooth") return PenaltyMode::Smooth;
  if (s == "smooth-sparse" || s == "sparse") return PenaltyMode::SmoothSparse;
  throw InvalidArgument("unknown penalty mode '" + s + "' (expected smooth or smooth-sparse)");
}

void PenaltyConfig::validate() const {
  if (!std::isfinite(tau) || tau < 0.0) throw InvalidArgument("penalty: tau must be finite and >= 0");
  if (!std::isfinite(eta) || eta < 0.0) throw InvalidArgument("penalty: eta must be finite and >= 0");
  if (!std::isfinite(lambda) || lambda < 0.0 || lambda > 1.0) throw InvalidArgument("penalty: lambda must lie in [0, 1]");
  if (mode == PenaltyMode::Smooth && lambda != 0.0) throw InvalidArgument("penalty: smooth mode requires lambda = 0");
}

int ComponentSet::nonzero() const {
  int k = 0;
  while (k < size() && sigma2(k) > 0.0) ++k;
  return k;
}

int component_cap(const DesignMatrices& dm, int k_max) {
  return std::max(0, std::min({k_max, dm.m(), dm.n() - 1, dm.width()}));
}

double penalized_quotient(const DesignMatrices& dm, const PenaltyConfig& config,
                          const Eigen::Ref<const Eigen::VectorXd>& a) {
  if (a.size() != dm.width()) throw InvalidArgument("penalized_quotient: coefficient length mismatch");
  const double n = dm.n();
  VectorXd t = dm.z * a;
  double num = (dm.yc.transpose() * t).squaredNorm() / (n * n);
  double den = t.squaredNorm() / n + penalty_value(dm.metric_for(config.eta), config.tau, config.lambda, a);
  if (!(den > 0.0)) return 0.0;
  return num / den;
}

Eigen::MatrixXd deflate(const Eigen::MatrixXd& z, const Eigen::Ref<const Eigen::VectorXd>& score) {
  if (score.size() != z.rows()) throw InvalidArgument("deflate: score length does not match the design rows");
  const double ss = score.squaredNorm();
  if (!(ss > 0.0)) throw InvalidArgument("deflate: zero score vector");
  Eigen::RowVectorXd proj = score.transpose() * z / ss;
  return z - score * proj;
}

SmoothSolver::SmoothSolver(const DesignMatrices& dm, double eta) : dm_(dm), eta_(eta) {
  if (!std::isfinite(eta) || eta < 0.0) throw InvalidArgument("smooth solver: eta must be finite and >= 0");
  metric_ = dm.metric_for(eta);
  metric_chol_ = lower_cholesky(metric_);
  dense_ = dm.width() < dm.n();
  if (dense_) {
    zz_ = dm.z.transpose() * dm.z / static_cast<double>(dm.n());
  } else {
    zw_ = whiten_blocks(dm.z, metric_chol_, dm.p, dm.dim);
    MatrixXd kernel = zw_ * zw_.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(kernel);
    kernel_vecs_ = es.eigenvectors();
    kernel_vals_ = es.eigenvalues();
  }
}

ComponentSet SmoothSolver::solve(double tau, int k_max) const {
  PenaltyConfig config = PenaltyConfig::smooth(tau, eta_);
  config.validate();
  const int cap = component_cap(dm_, k_max);
  if (cap == 0) return empty_set(dm_, 0, config);
  const int n = dm_.n();
  const int d = dm_.dim;
  if (dense_) {
    MatrixXd b = zz_;
    for (int j = 0; j < dm_.p; ++j) b.block(static_cast<Index>(j) * d, static_cast<Index>(j) * d, d, d) += tau * metric_;
    if (tau == 0.0) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(b, Eigen::EigenvaluesOnly);
      if (es.eigenvalues()(0) <= 1e-12 * es.eigenvalues().cwiseAbs().maxCoeff()) {
        throw NumericalError("regularization required: z'z/n is singular, use tau > 0");
      }
    }
    auto llt = std::make_shared<Eigen::LLT<MatrixXd>>(b);
    if (llt->info() != Eigen::Success) throw NumericalError("regularization required: z'z/n + P is not positive definite");
    MatrixXd half = llt->matrixL().solve(dm_.z.transpose());
    MatrixXd h = half.transpose() * half;
    auto coef_map = [&, llt](const VectorXd& v) -> VectorXd { return llt->solve(dm_.z.transpose() * v); };
    return sequential_components(dm_, h, coef_map, cap, config);
  }
  if (!(tau > 0.0)) {
    throw NumericalError("regularization required: p*D = " + std::to_string(dm_.width()) +
                         " >= n, the unpenalized problem is singular; use tau > 0");
  }
  const double top = std::max(kernel_vals_.maxCoeff(), 0.0);
  VectorXd hdiag(n), gdiag(n);
  for (int i = 0; i < n; ++i) {
    double lam = kernel_vals_(i);
    if (lam > kKernelRelative * top) {
      gdiag(i) = 1.0 / (lam / n + tau);
      hdiag(i) = lam * gdiag(i);
    } else {
      gdiag(i) = 0.0;
      hdiag(i) = 0.0;
    }
  }
  MatrixXd h = kernel_vecs_ * hdiag.asDiagonal() * kernel_vecs_.transpose();
  auto coef_map = [&](const VectorXd& v) -> VectorXd {
    VectorXd w = kernel_vecs_ * (gdiag.array() * (kernel_vecs_.transpose() * v).array()).matrix();
    return unwhiten(zw_.transpose() * w, metric_chol_, dm_.p, d);
  };
  return sequential_components(dm_, h, coef_map, cap, config);
}

SparseSolver::SparseSolver(const DesignMatrices& dm, double eta) : dm_(dm), eta_(eta) {
  if (!std::isfinite(eta) || eta < 0.0) throw InvalidArgument("sparse solver: eta must be finite and >= 0");
  metric_chol_ = lower_cholesky(dm.metric_for(eta));
  zw_ = whiten_blocks(dm.z, metric_chol_, dm.p, dm.dim);
  MatrixXd kernel = zw_ * zw_.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(kernel);
  kernel_vecs_ = es.eigenvectors();
  kernel_vals_ = es.eigenvalues();
  BlockEigens cache;
  cache.reset(zw_, dm.p, dm.dim);
  cache.compute_all();
  block_vecs_ = std::move(cache.vecs);
  block_vals_ = std::move(cache.vals);
}

ComponentSet SparseSolver::solve(double tau, double lambda, int k_max, const SparseOptions& opts) const {
  PenaltyConfig config = PenaltyConfig::sparse(tau, lambda, eta_);
  config.validate();
  if (!(tau > 0.0)) throw InvalidArgument("sparse solver: tau must be > 0");
  if (!(lambda > 0.0)) throw InvalidArgument("sparse solver: lambda must be > 0");
  const int cap = component_cap(dm_, k_max);
  ComponentSet out = empty_set(dm_, cap, config);
  if (cap == 0) return out;
  const int n = dm_.n();
  const int p = dm_.p;
  const int d = dm_.dim;
  const double n2 = static_cast<double>(n) * n;

  MatrixXd zw = zw_;
  MatrixXd kvecs = kernel_vecs_;
  VectorXd kvals = kernel_vals_;
  MatrixXd kernel;  // deflated zw zw', formed lazily after the first component
  BlockEigens own;
  MatrixXd mapped(dm_.width(), cap);  // whitened coefficients against the undeflated design
  MatrixXd scores(n, cap);
  double first = -1.0;

  for (int k = 0; k < cap; ++k) {
    if (k > 0) {
      VectorXd t = scores.col(k - 1);
      zw = deflate(zw, t);
      if (kernel.size() == 0) kernel = kernel_vecs_ * kernel_vals_.asDiagonal() * kernel_vecs_.transpose();
      MatrixXd proj = MatrixXd::Identity(n, n) - t * t.transpose() / t.squaredNorm();
      kernel = proj * kernel * proj;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (kernel + kernel.transpose()));
      kvecs = es.eigenvectors();
      kvals = es.eigenvalues();
      own.reset(zw, p, d);
    }

    // Start from the smooth (lambda = 0) leading direction of the current design.
    const double ktop = std::max(kvals.maxCoeff(), 0.0);
    VectorXd gdiag(n), hdiag(n);
    for (int i = 0; i < n; ++i) {
      double lam = kvals(i);
      gdiag(i) = lam > kKernelRelative * ktop ? 1.0 / (lam / n + tau) : 0.0;
      hdiag(i) = lam * gdiag(i);
    }
    MatrixXd uy = kvecs.transpose() * dm_.yc;
    TopPair init = top_eigenpair(uy.transpose() * hdiag.asDiagonal() * uy / n2);
    if (!(init.value > 0.0)) break;
    if (first > 0.0 && init.value <= kNullRelative * first) break;

    GroupState st{zw,
                  k == 0 ? &block_vecs_ : nullptr,
                  k == 0 ? &block_vals_ : nullptr,
                  own,
                  p,
                  d,
                  n,
                  tau,
                  lambda,
                  VectorXd(),
                  VectorXd(),
                  VectorXd::Zero(p)};
    st.x = zw.transpose() * (kvecs * (gdiag.array() * (uy * init.vector).array()).matrix());
    st.refresh();

    ComponentDiagnostics diag;
    diag.converged = false;
    double q = quotient(st, dm_.yc);
    diag.objective_trace.push_back(q);
    for (int it = 1; it <= opts.max_iter; ++it) {
      VectorXd ma = dm_.yc.transpose() * st.z;
      double man = ma.norm();
      if (!(man > 0.0)) break;
      VectorXd c = zw.transpose() * (dm_.yc * (ma / man)) / n;
      double den = st.denominator();
      st.scale(c.dot(st.x) / den);
      block_descent(st, c, opts);
      st.refresh();
      double qn = quotient(st, dm_.yc);
      diag.objective_trace.push_back(qn);
      diag.iterations = it;
      bool done = std::abs(qn - q) <= opts.tol * std::max(qn, std::numeric_limits<double>::min());
      q = qn;
      if (done) {
        diag.converged = true;
        break;
      }
    }
    if (!(q > 0.0)) break;
    if (first < 0.0) first = q;
    if (q <= kNullRelative * first) break;

    VectorXd t = st.z;
    double var = t.squaredNorm() / n;
    if (!(var > 0.0)) break;
    double s = 1.0 / std::sqrt(var);
    VectorXd x = st.x * s;
    t *= s;
    fix_sign(x, t, dm_.yc);
    // zw_k x = zw_0 r with r = x - sum_i r_i (t_i' zw_0 x) / ||t_i||^2.
    VectorXd r = x;
    if (k > 0) {
      VectorXd raw = zw_ * x;
      for (int i = 0; i < k; ++i) r -= mapped.col(i) * (scores.col(i).dot(raw) / scores.col(i).squaredNorm());
    }
    mapped.col(k) = r;
    scores.col(k) = t;
    out.coeffs.col(k) = unwhiten(r, metric_chol_, p, d);
    out.sigma2(k) = q;
    out.diagnostics[static_cast<std::size_t>(k)] = std::move(diag);
  }
  out.scores = dm_.z * out.coeffs;
  return out;
}

ComponentSet fit_components_smooth(const DesignMatrices& dm, double tau, double eta, int k_max) {
  return SmoothSolver(dm, eta).solve(tau, k_max);
}

ComponentSet fit_components_sparse(const DesignMatrices& dm, double tau, double lambda, double eta, int k_max,
                                   const SparseOptions& opts) {
  return SparseSolver(dm, eta).solve(tau, lambda, k_max, opts);
}

ComponentSet fit_components(const DesignMatrices& dm, const PenaltyConfig& config, int k_max) {
  config.validate();
  if (config.mode == PenaltyMode::Smooth) return fit_components_smooth(dm, config.tau, config.eta, k_max);
  return fit_components_sparse(dm, config.tau, config.lambda, config.eta, k_max);
}

}  // namespace mvfreg
