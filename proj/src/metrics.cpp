#include "mvfreg/metrics.hpp"

#include "mvfreg/error.hpp"

#include <string>

namespace mvfreg {

double mspe(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw InvalidArgument("mspe: prediction and truth shapes differ");
  }
  if (pred.size() == 0) throw InvalidArgument("mspe: empty input");
  return (pred - truth).squaredNorm() / static_cast<double>(pred.rows() * pred.cols());
}

double r_squared(const Eigen::MatrixXd& fitted, const Eigen::MatrixXd& y) {
  if (fitted.rows() != y.rows() || fitted.cols() != y.cols()) {
    throw InvalidArgument("r_squared: fitted and observed shapes differ");
  }
  if (y.rows() == 0) throw InvalidArgument("r_squared: empty input");
  Eigen::RowVectorXd mean = y.colwise().mean();
  double total = (y.rowwise() - mean).squaredNorm();
  if (!(total > 0.0)) throw InvalidArgument("r_squared: response has zero total variation");
  return 1.0 - (fitted - y).squaredNorm() / total;
}

SensSpec sens_spec(const std::vector<int>& selected, const std::vector<int>& truth, int p) {
  if (p < 1) throw InvalidArgument("sens_spec: p must be positive");
  if (truth.empty()) throw InvalidArgument("sens_spec: empty truth set, sensitivity undefined");
  std::vector<char> in_truth(static_cast<std::size_t>(p), 0);
  std::vector<char> in_sel(static_cast<std::size_t>(p), 0);
  auto mark = [p](const std::vector<int>& idx, std::vector<char>& flags, const char* what) {
    for (int j : idx) {
      if (j < 0 || j >= p) throw InvalidArgument(std::string("sens_spec: ") + what + " index out of range");
      flags[static_cast<std::size_t>(j)] = 1;
    }
  };
  mark(truth, in_truth, "truth");
  mark(selected, in_sel, "selected");
  int tp = 0, pos = 0, tn = 0, neg = 0;
  for (int j = 0; j < p; ++j) {
    if (in_truth[j]) {
      ++pos;
      tp += in_sel[j];
    } else {
      ++neg;
      tn += !in_sel[j];
    }
  }
  SensSpec out;
  out.sensitivity = static_cast<double>(tp) / pos;
  out.specificity = neg == 0 ? 1.0 : static_cast<double>(tn) / neg;
  return out;
}

}  // namespace mvfreg
