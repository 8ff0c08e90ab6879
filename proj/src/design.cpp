#include "mvfreg/design.hpp"

#include "mvfreg/error.hpp"
#include "mvfreg/parallel.hpp"

#include <cmath>
#include <string>

namespace mvfreg {

void CurveDataset::validate() const {
  const int t = T();
  if (n() < 2) throw InvalidArgument("dataset: need at least 2 samples, got " + std::to_string(n()));
  if (t < 2) throw InvalidArgument("dataset: need at least 2 grid points");
  if (m() < 1) throw InvalidArgument("dataset: response must have at least one column");
  if (p < 1) throw InvalidArgument("dataset: need at least one predictor curve");
  if (x.rows() != y.rows()) {
    throw InvalidArgument("dataset: " + std::to_string(x.rows()) + " curve rows but " + std::to_string(y.rows()) +
                          " response rows");
  }
  if (x.cols() != static_cast<Eigen::Index>(p) * t) {
    throw InvalidArgument("dataset: curve matrix has " + std::to_string(x.cols()) + " columns, expected p*T = " +
                          std::to_string(p * t));
  }
  for (int i = 0; i < t; ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw InvalidArgument("dataset: grid point outside [0, 1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InvalidArgument("dataset: grid must be strictly increasing");
  }
  if (!x.allFinite()) throw InvalidArgument("dataset: non-finite curve value");
  if (!y.allFinite()) throw InvalidArgument("dataset: non-finite response value");
}

CurveDataset CurveDataset::subset(std::span<const int> rows) const {
  CurveDataset out;
  out.grid = grid;
  out.p = p;
  const auto r = static_cast<Eigen::Index>(rows.size());
  out.x.resize(r, x.cols());
  out.y.resize(r, y.cols());
  for (Eigen::Index i = 0; i < r; ++i) {
    out.x.row(i) = x.row(rows[i]);
    out.y.row(i) = y.row(rows[i]);
  }
  if (truth) {
    CurveTruth tr = *truth;
    tr.f.resize(r, truth->f.cols());
    for (Eigen::Index i = 0; i < r; ++i) tr.f.row(i) = truth->f.row(rows[i]);
    out.truth = std::move(tr);
  }
  return out;
}

Eigen::MatrixXd center_and_score(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xbar,
                                 const Eigen::MatrixXd& quad, int p, int threads) {
  const Eigen::Index t = quad.rows();
  const Eigen::Index d = quad.cols();
  if (x.cols() != p * t || xbar.rows() != p || xbar.cols() != t) {
    throw InvalidArgument("center_and_score: curve dimensions do not match the model (p=" + std::to_string(p) +
                          ", T=" + std::to_string(t) + ")");
  }
  Eigen::MatrixXd z(x.rows(), p * d);
  parallel_for(static_cast<std::size_t>(p), threads, [&](std::size_t j) {
    const auto jj = static_cast<Eigen::Index>(j);
    Eigen::MatrixXd centered = x.middleCols(jj * t, t).rowwise() - xbar.row(jj);
    z.middleCols(jj * d, d).noalias() = centered * quad;
  });
  return z;
}

DesignMatrices build_design(const CurveDataset& ds, const BasisSpec& spec, double eta, int threads) {
  ds.validate();
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("build_design: eta must be finite and >= 0");
  const int t = ds.T();
  DesignMatrices dm;
  dm.p = ds.p;
  dm.dim = spec.dim;
  dm.eta = eta;
  dm.xbar.resize(ds.p, t);
  for (int j = 0; j < ds.p; ++j) dm.xbar.row(j) = ds.x.middleCols(static_cast<Eigen::Index>(j) * t, t).colwise().mean();
  dm.ybar = ds.y.colwise().mean().transpose();
  dm.yc = ds.y.rowwise() - dm.ybar.transpose();
  dm.z = center_and_score(ds.x, dm.xbar, quadrature_matrix(spec, ds.grid), ds.p, threads);
  dm.metric = penalty_metric(spec, eta);
  dm.gram = spec.gram;
  dm.roughness = spec.roughness;
  return dm;
}

double group_norm(const Eigen::Ref<const Eigen::VectorXd>& block, const Eigen::MatrixXd& metric) {
  if (block.size() != metric.rows() || metric.rows() != metric.cols()) {
    throw InvalidArgument("group_norm: block length does not match the metric");
  }
  double q = block.dot(metric * block);
  return std::sqrt(std::max(q, 0.0));
}

double penalty_value(const Eigen::MatrixXd& metric, double tau, double lambda,
                     const Eigen::Ref<const Eigen::VectorXd>& a) {
  const Eigen::Index d = metric.rows();
  if (d == 0 || a.size() % d != 0) throw InvalidArgument("penalty_value: coefficient length mismatch");
  double sum_sq = 0.0, sum = 0.0;
  for (Eigen::Index j = 0; j < a.size() / d; ++j) {
    double g = group_norm(a.segment(j * d, d), metric);
    sum_sq += g * g;
    sum += g;
  }
  return tau * ((1.0 - lambda) * sum_sq + lambda * sum * sum);
}

double penalty_value(const DesignMatrices& dm, double tau, double lambda, const Eigen::Ref<const Eigen::VectorXd>& a) {
  if (a.size() != dm.width()) throw InvalidArgument("penalty_value: coefficient length mismatch");
  return penalty_value(dm.metric, tau, lambda, a);
}

}  // namespace mvfreg
