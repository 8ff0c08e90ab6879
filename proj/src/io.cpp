#include "mvfreg/io.hpp"

#include "mvfreg/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mvfreg {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

void write_header(std::ostream& out, const std::vector<std::string>& header) {
  for (const auto& line : header) out << "# " << line << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = cell.find_first_not_of(' ');
    cells.push_back(start == std::string::npos ? std::string() : cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open " + path);
  }
  // Next non-comment, non-blank line split into cells; false at end.
  bool next(std::vector<std::string>& cells) {
    std::string line;
    while (std::getline(in_, line)) {
      ++row_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      cells = split(line);
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(path_ + ":" + std::to_string(row_) + ": " + what);
  }
  double number(const std::string& s) const {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("'" + s + "' is not a number");
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
  }
  long integer(const std::string& s) const {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) fail("'" + s + "' is not a nonnegative integer");
    return v;
  }

 private:
  std::string path_;
  std::ifstream in_;
  long row_ = 0;
};

}  // namespace

DatasetFiles dataset_files(const std::string& prefix) {
  return {prefix + "_grid.csv", prefix + "_curves.csv", prefix + "_responses.csv", prefix + "_truth.json"};
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw InvalidArgument("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

void write_dataset(const std::string& prefix, const CurveDataset& ds, const std::vector<std::string>& header) {
  const DatasetFiles files = dataset_files(prefix);
  const int T = ds.T();
  {
    auto out = open_out(files.grid);
    write_header(out, header);
    out << "t_index,t\n";
    for (int i = 0; i < T; ++i) out << i << ',' << format_double(ds.grid[i]) << '\n';
  }
  {
    auto out = open_out(files.curves);
    write_header(out, header);
    out << "sample_id,curve_id,t_index,value\n";
    for (int l = 0; l < ds.n(); ++l) {
      for (int j = 0; j < ds.p; ++j) {
        for (int i = 0; i < T; ++i) {
          out << l << ',' << j << ',' << i << ',' << format_double(ds.x(l, static_cast<Eigen::Index>(j) * T + i)) << '\n';
        }
      }
    }
    if (!out) throw DataError("failed writing " + files.curves);
  }
  {
    auto out = open_out(files.responses);
    write_header(out, header);
    for (int r = 0; r < ds.m(); ++r) out << (r ? "," : "") << 'y' << r;
    out << '\n';
    for (int l = 0; l < ds.n(); ++l) {
      for (int r = 0; r < ds.m(); ++r) out << (r ? "," : "") << format_double(ds.y(l, r));
      out << '\n';
    }
  }
  if (ds.truth) {
    nlohmann::ordered_json j;
    j["header"] = header;
    j["support"] = ds.truth->support;
    j["scale"] = ds.truth->scale;
    j["sigma"] = ds.truth->sigma;
    nlohmann::ordered_json f = nlohmann::ordered_json::array();
    for (Eigen::Index l = 0; l < ds.truth->f.rows(); ++l) {
      std::vector<double> row(ds.truth->f.cols());
      for (Eigen::Index r = 0; r < ds.truth->f.cols(); ++r) row[r] = ds.truth->f(l, r);
      f.push_back(row);
    }
    j["regression_function"] = std::move(f);
    write_text(files.truth, j.dump(1) + "\n");
  }
}

std::vector<double> read_grid(const std::string& path) {
  CsvReader in(path);
  std::vector<std::string> cells;
  if (!in.next(cells)) throw DataError(path + ": empty grid file");
  if (cells.size() != 2 || cells[0] != "t_index" || cells[1] != "t") in.fail("expected header 't_index,t'");
  std::vector<double> grid;
  while (in.next(cells)) {
    if (cells.size() != 2) in.fail("expected 2 columns");
    long idx = in.integer(cells[0]);
    if (idx != static_cast<long>(grid.size())) in.fail("t_index out of order (expected " + std::to_string(grid.size()) + ")");
    double t = in.number(cells[1]);
    if (t < 0.0 || t > 1.0) in.fail("grid point outside [0, 1]");
    if (!grid.empty() && !(t > grid.back())) in.fail("grid must be strictly increasing");
    grid.push_back(t);
  }
  if (grid.size() < 2) throw DataError(path + ": grid needs at least 2 points");
  return grid;
}

Eigen::MatrixXd read_curves(const std::string& path, int T, int* p_out) {
  CsvReader in(path);
  std::vector<std::string> cells;
  if (!in.next(cells)) throw DataError(path + ": empty curves file");
  if (cells != std::vector<std::string>{"sample_id", "curve_id", "t_index", "value"}) {
    in.fail("expected header 'sample_id,curve_id,t_index,value'");
  }
  struct Entry {
    long sample, curve, t;
    double value;
  };
  std::vector<Entry> entries;
  long n = 0, p = 0;
  while (in.next(cells)) {
    if (cells.size() != 4) in.fail("expected 4 columns");
    Entry e{in.integer(cells[0]), in.integer(cells[1]), in.integer(cells[2]), in.number(cells[3])};
    if (e.t >= T) in.fail("t_index " + std::to_string(e.t) + " outside the grid of " + std::to_string(T) + " points");
    n = std::max(n, e.sample + 1);
    p = std::max(p, e.curve + 1);
    entries.push_back(e);
  }
  if (entries.empty()) throw DataError(path + ": no curve values");
  const long expected = n * p * T;
  if (static_cast<long>(entries.size()) != expected) {
    throw DataError(path + ": " + std::to_string(entries.size()) + " values, expected n*p*T = " + std::to_string(expected));
  }
  Eigen::MatrixXd x(n, p * T);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, p * T);
  for (const auto& e : entries) {
    const Eigen::Index c = e.curve * T + e.t;
    if (seen(e.sample, c)) {
      throw DataError(path + ": duplicate value for sample " + std::to_string(e.sample) + ", curve " +
                      std::to_string(e.curve) + ", t_index " + std::to_string(e.t));
    }
    seen(e.sample, c) = true;
    x(e.sample, c) = e.value;
  }
  if (p_out) *p_out = static_cast<int>(p);
  return x;
}

Eigen::MatrixXd read_responses(const std::string& path) {
  CsvReader in(path);
  std::vector<std::string> cells;
  if (!in.next(cells)) throw DataError(path + ": empty responses file");
  const std::size_t m = cells.size();
  if (m == 0) in.fail("missing header");
  std::vector<std::vector<double>> rows;
  while (in.next(cells)) {
    if (cells.size() != m) in.fail("expected " + std::to_string(m) + " columns");
    std::vector<double> row(m);
    for (std::size_t r = 0; r < m; ++r) row[r] = in.number(cells[r]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no response rows");
  Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m));
  for (std::size_t l = 0; l < rows.size(); ++l) {
    for (std::size_t r = 0; r < m; ++r) y(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(r)) = rows[l][r];
  }
  return y;
}

CurveDataset read_dataset(const std::string& prefix) {
  const DatasetFiles files = dataset_files(prefix);
  CurveDataset ds;
  ds.grid = read_grid(files.grid);
  ds.x = read_curves(files.curves, ds.T(), &ds.p);
  ds.y = read_responses(files.responses);
  if (ds.y.rows() != ds.x.rows()) {
    throw DataError(files.responses + ": " + std::to_string(ds.y.rows()) + " response rows but " + files.curves +
                    " has " + std::to_string(ds.x.rows()) + " samples");
  }
  try {
    ds.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(prefix + ": " + e.what());
  }
  return ds;
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::string>& columns, const Eigen::MatrixXd& values) {
  if (static_cast<Eigen::Index>(columns.size()) != values.cols()) throw InvalidArgument("write_matrix_csv: column count mismatch");
  auto out = open_out(path);
  write_header(out, header);
  out << "sample_id";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << ',' << format_double(values(i, j));
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace mvfreg
