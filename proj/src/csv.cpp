#include "hetmed/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hetmed/errors.hpp"

namespace hetmed {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_cell(const std::string& cell, const std::string& column, Eigen::Index row) {
  if (cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan") {
    throw InputError("csv: missing value in column '" + column + "' at data row " +
                     std::to_string(row + 1) + " (complete cases required)");
  }
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw InputError("csv: non-numeric cell '" + cell + "' in column '" + column +
                     "' at data row " + std::to_string(row + 1));
  }
  return value;
}

}  // namespace

Dataset ingest_csv(const std::string& path, const ColumnMapping& mapping, IngestReport* report) {
  std::ifstream in(path);
  if (!in) throw InputError("csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("csv: '" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);

  auto column_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw InputError("csv: missing column '" + name + "' in '" + path + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t iy = column_index(mapping.y);
  const std::size_t ia = column_index(mapping.a);
  const std::size_t im = column_index(mapping.m);
  std::vector<std::size_t> icov;
  for (const auto& name : mapping.covariates) icov.push_back(column_index(name));

  std::vector<std::vector<double>> rows;
  Eigen::Index blank = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      ++blank;
      continue;
    }
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw InputError("csv: data row " + std::to_string(rows.size() + 1) + " has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    const auto r = static_cast<Eigen::Index>(rows.size());
    std::vector<double> row;
    row.reserve(3 + icov.size());
    row.push_back(parse_cell(fields[iy], mapping.y, r));
    row.push_back(parse_cell(fields[ia], mapping.a, r));
    row.push_back(parse_cell(fields[im], mapping.m, r));
    for (std::size_t j = 0; j < icov.size(); ++j) {
      row.push_back(parse_cell(fields[icov[j]], mapping.covariates[j], r));
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  VectorXd y(n), a(n), m(n);
  MatrixXd x(n, static_cast<Eigen::Index>(icov.size()) + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = rows[i][0];
    a(i) = rows[i][1];
    m(i) = rows[i][2];
    x(i, 0) = 1.0;
    for (std::size_t j = 0; j < icov.size(); ++j) {
      x(i, static_cast<Eigen::Index>(j) + 1) = rows[i][3 + j];
    }
  }
  if (report) {
    report->n_rows = n;
    report->n_blank_skipped = blank;
  }
  return Dataset(std::move(y), std::move(a), std::move(m), std::move(x));
}

void write_dataset_csv(const std::string& path, const Dataset& data,
                       const ColumnMapping& mapping) {
  if (static_cast<Eigen::Index>(mapping.covariates.size()) + 1 != data.p()) {
    throw InputError("csv: covariate names do not match the dataset width");
  }
  std::ofstream out(path);
  if (!out) throw InputError("csv: cannot write '" + path + "'");
  out << mapping.y << ',' << mapping.a << ',' << mapping.m;
  for (const auto& name : mapping.covariates) out << ',' << name;
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out << data.y(i) << ',' << data.a(i) << ',' << data.m(i);
    for (Eigen::Index j = 1; j < data.p(); ++j) out << ',' << data.x(i, j);
    out << '\n';
  }
  if (!out) throw InputError("csv: failed while writing '" + path + "'");
}

}  // namespace hetmed
