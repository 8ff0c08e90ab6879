#pragma once

#include "mvfreg/design.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mvfreg {

/// File names of a dataset written under a common prefix:
///   <prefix>_grid.csv       t_index,t
///   <prefix>_curves.csv     sample_id,curve_id,t_index,value (long form)
///   <prefix>_responses.csv  y0,...,y{m-1}; one row per sample in id order
///   <prefix>_truth.json     support, scale, noise level, regression function
/// Ids are 0-based. Lines starting with '#' are comments.
struct DatasetFiles {
  std::string grid;
  std::string curves;
  std::string responses;
  std::string truth;
};

DatasetFiles dataset_files(const std::string& prefix);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Writes grid, curves and responses (and truth when present). Each CSV
/// starts with the given comment lines, emitted as "# <line>".
void write_dataset(const std::string& prefix, const CurveDataset& ds, const std::vector<std::string>& header);

std::vector<double> read_grid(const std::string& path);
/// n x (p*T) curves; `p_out` receives the number of curves per sample.
Eigen::MatrixXd read_curves(const std::string& path, int T, int* p_out);
Eigen::MatrixXd read_responses(const std::string& path);

/// Reads a dataset written by write_dataset (truth is not read back).
/// Inconsistencies raise DataError naming the file and row.
CurveDataset read_dataset(const std::string& prefix);

/// CSV with the header comments, a column-name row and one row per matrix
/// row, prefixed by sample_id.
void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::string>& columns, const Eigen::MatrixXd& values);

void write_text(const std::string& path, const std::string& text);

}  // namespace mvfreg
