#include "cfmsd/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cfmsd/graph.hpp"

namespace cfmsd {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvTable read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (table.header.empty()) {
      table.header = split(line);
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                  " cells, expected " + std::to_string(table.header.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto res = std::from_chars(first, last, row[c]);
      if (cell.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(row[c])) {
        throw Error(path.string() + ": parse error at line " + std::to_string(line_no) + ", column " +
                    std::to_string(c + 1) + " ('" + table.header[c] + "'): '" + cell + "' is not a finite number");
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw Error(path.string() + ": empty CSV");
  return table;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t j = 0; j < data.d(); ++j) out << (j ? "," : "") << 'x' << j;
  out << '\n';
  for (Eigen::Index r = 0; r < data.values.rows(); ++r) {
    for (Eigen::Index j = 0; j < data.values.cols(); ++j) out << (j ? "," : "") << format_double(data.values(r, j));
    out << '\n';
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  const CsvTable t = read_numeric_csv(path);
  if (t.rows.empty()) throw Error(path.string() + ": no data rows");
  Dataset data{Eigen::MatrixXd(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()))};
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c)
      data.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.rows[r][c];
  return data;
}

std::filesystem::path intervention_file(const std::filesystem::path& dir, std::size_t target) {
  return dir / ("int_target" + std::to_string(target) + ".csv");
}

void write_intervention_csv(const std::filesystem::path& path, const InterventionSet& set) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t j = 0; j < set.d(); ++j) out << 'x' << j << ',';
  out << "do_value\n";
  for (std::size_t k = 0; k < set.do_values.size(); ++k) {
    const auto blk = set.block(k);
    for (Eigen::Index r = 0; r < blk.rows(); ++r) {
      for (Eigen::Index j = 0; j < blk.cols(); ++j) out << format_double(blk(r, j)) << ',';
      out << format_double(set.do_values[k]) << '\n';
    }
  }
}

InterventionSet read_intervention_csv(const std::filesystem::path& path, std::size_t target) {
  const CsvTable t = read_numeric_csv(path);
  if (t.header.empty() || t.header.back() != "do_value") {
    throw Error(path.string() + ": last column must be do_value");
  }
  const std::size_t d = t.header.size() - 1;
  if (target >= d) throw Error(path.string() + ": target " + std::to_string(target) + " out of range");
  if (t.rows.empty()) throw Error(path.string() + ": no data rows");

  InterventionSet set;
  set.target = target;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double x = t.rows[r][d];
    std::size_t k = 0;
    while (k < set.do_values.size() && set.do_values[k] != x) ++k;
    if (k == set.do_values.size()) {
      set.do_values.push_back(x);
      groups.emplace_back();
    }
    groups[k].push_back(r);
  }
  set.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(d));
  Eigen::Index out_row = 0;
  for (const auto& g : groups) {
    set.per_value_counts.push_back(g.size());
    for (std::size_t r : g) {
      for (std::size_t c = 0; c < d; ++c) set.values(out_row, static_cast<Eigen::Index>(c)) = t.rows[r][c];
      ++out_row;
    }
  }
  set.validate();
  return set;
}

void write_intervention_dir(const std::filesystem::path& dir, const std::vector<InterventionSet>& sets) {
  std::filesystem::create_directories(dir);
  for (const InterventionSet& s : sets) write_intervention_csv(intervention_file(dir, s.target), s);
}

std::vector<InterventionSet> read_intervention_dir(const std::filesystem::path& dir, std::size_t d) {
  std::vector<InterventionSet> sets;
  for (std::size_t i = 0; i < d; ++i) {
    const auto file = intervention_file(dir, i);
    if (!std::filesystem::exists(file)) {
      throw Error("missing intervention file for variable " + std::to_string(i) + ": " + file.string());
    }
    InterventionSet s = read_intervention_csv(file, i);
    if (s.d() != d) {
      throw Error(file.string() + ": has " + std::to_string(s.d()) + " variables, expected " + std::to_string(d));
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace cfmsd
