#pragma once

// CSV ingestion. Lines are comma-separated numbers; blank lines and lines
// starting with '#' are skipped. Errors report the 1-based line number.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "halpern/error.hpp"
#include "halpern/harness/text.hpp"
#include "halpern/wdro.hpp"

namespace halpern::harness {

/// Numeric matrix with a fixed column count.
inline Eigen::MatrixXd ingest_matrix_csv(std::istream& in, const std::string& name = "<stream>") {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<double> row;
    for (auto cell : split(t, ',')) {
      double v;
      if (!parse_double(cell, v) || !std::isfinite(v)) {
        std::ostringstream os;
        os << name << ':' << lineno << ": malformed value '" << trim(cell) << "'";
        throw DataError(os.str());
      }
      row.push_back(v);
    }
    if (cols == 0) cols = row.size();
    if (row.size() != cols) {
      std::ostringstream os;
      os << name << ':' << lineno << ": expected " << cols << " columns, found " << row.size();
      throw DataError(os.str());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(name + ": empty file");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline Eigen::MatrixXd ingest_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return ingest_matrix_csv(in, path);
}

/// Features in all but the last column, label (-1 or +1) in the last.
inline SupervisedDataset ingest_csv(std::istream& in, const std::string& name = "<stream>") {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> linenos;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<double> row;
    for (auto cell : split(t, ',')) {
      double v;
      if (!parse_double(cell, v) || !std::isfinite(v)) {
        std::ostringstream os;
        os << name << ':' << lineno << ": malformed value '" << trim(cell) << "'";
        throw DataError(os.str());
      }
      row.push_back(v);
    }
    if (row.size() < 2) {
      std::ostringstream os;
      os << name << ':' << lineno << ": need at least one feature and a label";
      throw DataError(os.str());
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      std::ostringstream os;
      os << name << ':' << lineno << ": expected " << rows.front().size() << " columns, found " << row.size();
      throw DataError(os.str());
    }
    if (row.back() != 1.0 && row.back() != -1.0) {
      std::ostringstream os;
      os << name << ':' << lineno << ": label " << format_double(row.back()) << " is not -1 or +1";
      throw DataError(os.str());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(name + ": empty file");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(rows.front().size() - 1);
  SupervisedDataset data;
  data.features.resize(n, m);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) data.features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    data.labels[i] = rows[static_cast<std::size_t>(i)].back();
  }
  return data;
}

inline SupervisedDataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return ingest_csv(in, path);
}

inline void write_csv(const SupervisedDataset& data, std::ostream& out) {
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) out << format_double(data.features(i, j)) << ',';
    out << format_double(data.labels[i]) << '\n';
  }
}

inline void write_csv(const SupervisedDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(data, out);
}

}  // namespace halpern::harness
