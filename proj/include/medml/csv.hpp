#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "medml/common.hpp"
#include "medml/data.hpp"

namespace medml {

// RFC-4180-style table: header row required, UTF-8, '.' decimal separator.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

inline bool is_missing(const std::string& cell) {
  const std::string t = trim(cell);
  return t.empty() || t == "NA" || t == "na" || t == "NaN" || t == "nan" ||
         t == "N/A" || t == ".";
}

inline bool parse_double(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::FileNotFound, "cannot open '" + path + "'");
  }
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::ParseError, "'" + path + "' has no header row");
  }
  for (auto& name : detail::split_csv_line(line)) {
    table.header.push_back(detail::trim(name));
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != table.header.size()) {
      throw Error(ErrorCode::ParseError,
                  "row " + std::to_string(table.rows.size() + 2) + " has " +
                      std::to_string(cells.size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

struct ColumnRoles {
  std::string outcome;
  std::string treatment;
  std::string mediator;
  std::vector<std::string> covariates;  // empty: all remaining columns
};

struct CsvDataset {
  Dataset data;
  std::vector<std::string> covariate_names;
  int rejected_rows = 0;  // rows dropped for missing referenced fields
};

// Builds a validated Dataset from a parsed table. Missing referenced values
// reject the row (counted); a value that parses but violates the binary
// contract is a located ParseError.
inline CsvDataset dataset_from_csv(const CsvTable& table,
                                   const ColumnRoles& roles) {
  auto find_col = [&](const std::string& name) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) {
      throw Error(ErrorCode::ParseError, "column '" + name + "' not found");
    }
    return static_cast<int>(it - table.header.begin());
  };

  const int col_y = find_col(roles.outcome);
  const int col_d = find_col(roles.treatment);
  const int col_m = find_col(roles.mediator);
  if (col_y == col_d || col_y == col_m || col_d == col_m) {
    throw Error(ErrorCode::InvalidConfig, "column roles must be distinct");
  }

  std::vector<int> x_cols;
  CsvDataset out;
  if (roles.covariates.empty()) {
    for (int j = 0; j < static_cast<int>(table.header.size()); ++j) {
      if (j != col_y && j != col_d && j != col_m) {
        x_cols.push_back(j);
        out.covariate_names.push_back(table.header[static_cast<std::size_t>(j)]);
      }
    }
  } else {
    for (const auto& name : roles.covariates) {
      const int j = find_col(name);
      if (j == col_y || j == col_d || j == col_m) {
        throw Error(ErrorCode::InvalidConfig,
                    "column '" + name + "' already has a role");
      }
      x_cols.push_back(j);
      out.covariate_names.push_back(name);
    }
  }
  if (x_cols.empty()) {
    throw Error(ErrorCode::InvalidConfig, "no covariate columns selected");
  }

  auto cell_error = [&](std::size_t row, int col, const std::string& what) {
    return Error(ErrorCode::ParseError,
                 what + " at row " + std::to_string(row + 2) + ", column '" +
                     table.header[static_cast<std::size_t>(col)] + "'");
  };
  auto parse_binary = [&](const std::string& cell, std::size_t row, int col) {
    double value;
    if (!detail::parse_double(cell, value)) {
      throw cell_error(row, col, "unparseable value '" + detail::trim(cell) + "'");
    }
    if (value != 0.0 && value != 1.0) {
      throw cell_error(row, col,
                       "non-binary value '" + detail::trim(cell) + "'");
    }
    return static_cast<int>(value);
  };

  std::vector<double> y;
  std::vector<int> d, m;
  std::vector<std::vector<double>> x;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    bool missing = detail::is_missing(cells[static_cast<std::size_t>(col_y)]) ||
                   detail::is_missing(cells[static_cast<std::size_t>(col_d)]) ||
                   detail::is_missing(cells[static_cast<std::size_t>(col_m)]);
    for (int j : x_cols) {
      missing = missing || detail::is_missing(cells[static_cast<std::size_t>(j)]);
    }
    if (missing) {
      ++out.rejected_rows;
      continue;
    }
    double yv;
    if (!detail::parse_double(cells[static_cast<std::size_t>(col_y)], yv)) {
      throw cell_error(r, col_y, "unparseable value");
    }
    y.push_back(yv);
    d.push_back(parse_binary(cells[static_cast<std::size_t>(col_d)], r, col_d));
    m.push_back(parse_binary(cells[static_cast<std::size_t>(col_m)], r, col_m));
    std::vector<double> row_x;
    for (int j : x_cols) {
      double xv;
      if (!detail::parse_double(cells[static_cast<std::size_t>(j)], xv)) {
        throw cell_error(r, j, "unparseable value");
      }
      row_x.push_back(xv);
    }
    x.push_back(std::move(row_x));
  }

  const auto n = static_cast<Eigen::Index>(y.size());
  Dataset data;
  data.outcome.resize(n);
  data.treatment.resize(n);
  data.mediator.resize(n);
  data.covariates.resize(n, static_cast<Eigen::Index>(x_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    data.outcome[i] = y[static_cast<std::size_t>(i)];
    data.treatment[i] = d[static_cast<std::size_t>(i)];
    data.mediator[i] = m[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      data.covariates(i, static_cast<Eigen::Index>(j)) =
          x[static_cast<std::size_t>(i)][j];
    }
  }
  out.data = validate_dataset(std::move(data));
  return out;
}

// Writes a dataset in the same format `estimate` ingests: y, d, m, x1..xp.
inline void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream outfile(path);
  if (!outfile) {
    throw Error(ErrorCode::FileNotFound, "cannot write '" + path + "'");
  }
  outfile << "y,d,m";
  for (Eigen::Index j = 0; j < data.p(); ++j) outfile << ",x" << (j + 1);
  outfile << "\n";
  outfile.precision(17);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    outfile << data.outcome[i] << ',' << data.treatment[i] << ','
            << data.mediator[i];
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      outfile << ',' << data.covariates(i, j);
    }
    outfile << "\n";
  }
}

}  // namespace medml
