#pragma once
// CSV exchange for datasets. Observational files are n x d with header
// x0..x{d-1}. Interventional files are named int_target{i}.csv and carry an
// extra trailing do_value column. Values are written with round-trip
// precision.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cfmsd/scm.hpp"

namespace cfmsd {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Parses a numeric CSV with a header line. Errors name the 1-based line and
// the column of the offending cell.
CsvTable read_numeric_csv(const std::filesystem::path& path);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

std::filesystem::path intervention_file(const std::filesystem::path& dir, std::size_t target);

void write_intervention_csv(const std::filesystem::path& path, const InterventionSet& set);
// Rows are grouped by do_value in order of first appearance.
InterventionSet read_intervention_csv(const std::filesystem::path& path, std::size_t target);

void write_intervention_dir(const std::filesystem::path& dir, const std::vector<InterventionSet>& sets);
// Reads int_target0.csv .. int_target{d-1}.csv; a missing file is an error
// naming the variable.
std::vector<InterventionSet> read_intervention_dir(const std::filesystem::path& dir, std::size_t d);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace cfmsd
