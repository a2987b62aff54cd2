#pragma once
// Capacity retention of electrolyte additives regressed on DFT descriptors:
//   capacity = theta0 + theta_lumo * LUMO + theta_f * (#F atoms)
// fitted by least squares on observed additives. Additives without cycle
// data are predicted by transporting the closest observed additive with the
// same fluorine count along the fitted LUMO effect.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace cfmsd {

struct SeiRow {
  std::string additive;
  double lumo_ev = 0.0;
  double f_count = 0.0;
  std::optional<double> capacity_pct;
  bool observed = false;  // type == Obs
};

struct SeiPrediction {
  std::string additive;
  double lumo_ev = 0.0;
  double f_count = 0.0;
  double capacity_pct = 0.0;  // anchored on the nearest observed additive
  std::string anchor;
  double regression_capacity_pct = 0.0;  // theta0 + theta . x
};

struct SeiFit {
  double theta0 = 0.0;
  double theta_lumo = 0.0;
  double theta_f = 0.0;
  double r2 = 0.0;
  std::size_t n_observed = 0;
  std::vector<SeiPrediction> predictions;

  nlohmann::json to_json() const;
};

// Columns: additive, lumo_ev, f_count, capacity_pct, type (Obs|Pred); extra
// columns are ignored. capacity_pct may be empty on Pred rows.
std::vector<SeiRow> read_sei_table(const std::filesystem::path& path);

SeiFit sei_regression(const std::vector<SeiRow>& rows);

}  // namespace cfmsd
