#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "spps/errors.hpp"
#include "spps/types.hpp"

namespace spps {

struct ColumnRoles {
  std::string indicator;
  std::optional<std::string> outcome;
  std::vector<std::string> covariates;  // empty: every other column
};

/// Shortest decimal text that parses back to exactly `x`.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one line on commas; double quotes group a field and "" escapes a quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  for (auto& f : fields) f = std::string(trim(f));
  return fields;
}

inline bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan";
}

inline std::optional<double> parse_number(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

inline std::string position(std::size_t row, const std::string& column) {
  return "row " + std::to_string(row) + ", column '" + column + "'";
}

}  // namespace detail

/// Reads a header-first CSV into a Dataset with an intercept column prepended.
/// Rows are numbered from 1 after the header. A missing outcome (empty or NA)
/// is accepted only in missing-data mode on rows whose indicator is 0.
inline Dataset read_csv(std::istream& in, const ColumnRoles& roles, Mode mode,
                        const std::string& source = "input") {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty())
    throw InputError(source + ": missing header row");
  const std::vector<std::string> header = detail::split_csv_line(line);

  auto find_column = [&](const std::string& name) -> std::size_t {
    std::size_t found = header.size();
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] != name) continue;
      if (found != header.size()) throw InputError(source + ": duplicate column '" + name + "'");
      found = j;
    }
    if (found == header.size()) throw InputError(source + ": no column named '" + name + "'");
    return found;
  };

  require(!roles.indicator.empty(), "an indicator column is required");
  const std::size_t ind_col = find_column(roles.indicator);
  std::optional<std::size_t> out_col;
  if (roles.outcome) {
    out_col = find_column(*roles.outcome);
    require(*out_col != ind_col, "outcome and indicator must be different columns");
  }
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> cov_names = roles.covariates;
  if (cov_names.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (j != ind_col && (!out_col || j != *out_col)) cov_names.push_back(header[j]);
  }
  for (const auto& name : cov_names) {
    const std::size_t j = find_column(name);
    require(j != ind_col && (!out_col || j != *out_col),
            "column '" + name + "' cannot be both a covariate and the indicator/outcome");
    cov_cols.push_back(j);
  }

  std::vector<std::vector<double>> covs;
  std::vector<double> ind, out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw InputError(source + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " fields, header has " +
                       std::to_string(header.size()));
    auto number = [&](std::size_t j) {
      const auto v = detail::parse_number(cells[j]);
      if (!v)
        throw InputError(source + ": " + detail::position(row, header[j]) +
                         ": cannot parse '" + cells[j] + "' as a number");
      return *v;
    };
    const double a = number(ind_col);
    if (a != 0.0 && a != 1.0)
      throw InputError(source + ": " + detail::position(row, header[ind_col]) +
                       ": indicator must be 0 or 1, got '" + cells[ind_col] + "'");
    ind.push_back(a);
    std::vector<double> x;
    for (std::size_t j : cov_cols) x.push_back(number(j));
    covs.push_back(std::move(x));
    if (out_col) {
      if (detail::is_missing(cells[*out_col])) {
        if (mode != Mode::missing_data || a != 0.0)
          throw InputError(source + ": " + detail::position(row, header[*out_col]) +
                           ": outcome may be missing only for non-responders in missing-data mode");
        out.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        out.push_back(number(*out_col));
      }
    }
  }
  if (row == 0) throw InputError(source + ": no data rows");

  Dataset data;
  const auto n = static_cast<Eigen::Index>(row);
  const auto p = static_cast<Eigen::Index>(cov_cols.size()) + 1;
  data.design.resize(n, p);
  data.indicator.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.design(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j)
      data.design(i, j) = covs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - 1)];
    data.indicator[i] = ind[static_cast<std::size_t>(i)];
  }
  if (out_col) data.outcome = Eigen::Map<const Eigen::VectorXd>(out.data(), n);
  data.covariate_names = cov_names;
  return data;
}

inline Dataset parse_csv(const std::string& path, const ColumnRoles& roles, Mode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  return read_csv(in, roles, mode, path);
}

/// Writes covariates (intercept dropped), indicator and outcome with
/// round-trip exact numbers; read_csv with the same names restores `data` exactly.
inline void write_csv(std::ostream& os, const Dataset& data,
                      const std::string& indicator_name = "t",
                      const std::string& outcome_name = "y") {
  for (Eigen::Index j = 1; j < data.cols(); ++j) {
    const auto k = static_cast<std::size_t>(j - 1);
    os << (k < data.covariate_names.size() ? data.covariate_names[k] : "x" + std::to_string(j))
       << ',';
  }
  os << indicator_name;
  if (data.outcome) os << ',' << outcome_name;
  os << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 1; j < data.cols(); ++j) os << format_double(data.design(i, j)) << ',';
    os << format_double(data.indicator[i]);
    if (data.outcome) os << ',' << format_double((*data.outcome)[i]);
    os << '\n';
  }
}

inline std::string to_csv(const Dataset& data) {
  std::ostringstream os;
  write_csv(os, data);
  return os.str();
}

}  // namespace spps
