#include "cfmsd/sei.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

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

double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw Error(where + ": '" + cell + "' is not a finite number");
  }
  return v;
}

}  // namespace

std::vector<SeiRow> read_sei_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split(line);
  }
  if (header.empty()) throw Error(path.string() + ": empty table");

  auto column = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw Error(path.string() + ": missing column '" + name + "'");
  };
  const std::size_t c_add = column("additive");
  const std::size_t c_lumo = column("lumo_ev");
  const std::size_t c_f = column("f_count");
  const std::size_t c_cap = column("capacity_pct");
  const std::size_t c_type = column("type");

  std::vector<SeiRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw Error(where + " has " + std::to_string(cells.size()) + " cells, expected " +
                  std::to_string(header.size()));
    }
    SeiRow r;
    r.additive = cells[c_add];
    r.lumo_ev = parse_number(cells[c_lumo], where + ", column lumo_ev");
    r.f_count = parse_number(cells[c_f], where + ", column f_count");
    if (cells[c_type] == "Obs") {
      r.observed = true;
    } else if (cells[c_type] != "Pred") {
      throw Error(where + ": type must be Obs or Pred, got '" + cells[c_type] + "'");
    }
    if (!cells[c_cap].empty()) r.capacity_pct = parse_number(cells[c_cap], where + ", column capacity_pct");
    if (r.observed && !r.capacity_pct) throw Error(where + ": Obs row without capacity_pct");
    rows.push_back(std::move(r));
  }
  return rows;
}

SeiFit sei_regression(const std::vector<SeiRow>& rows) {
  std::vector<const SeiRow*> obs;
  for (const SeiRow& r : rows)
    if (r.observed) obs.push_back(&r);
  if (obs.size() < 3) {
    throw Error("SEI regression needs at least 3 observed additives, got " + std::to_string(obs.size()));
  }

  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    X(r, 0) = 1.0;
    X(r, 1) = obs[r]->lumo_ev;
    X(r, 2) = obs[r]->f_count;
    y(r) = *obs[r]->capacity_pct;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < 3) throw Error("SEI regression design is rank deficient (LUMO or F count does not vary)");
  const Eigen::VectorXd theta = qr.solve(y);

  SeiFit fit;
  fit.theta0 = theta(0);
  fit.theta_lumo = theta(1);
  fit.theta_f = theta(2);
  fit.n_observed = obs.size();
  const Eigen::VectorXd resid = y - X * theta;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  fit.r2 = ss_tot > 0.0 ? 1.0 - resid.squaredNorm() / ss_tot : 1.0;

  for (const SeiRow& r : rows) {
    if (r.observed) continue;
    SeiPrediction p;
    p.additive = r.additive;
    p.lumo_ev = r.lumo_ev;
    p.f_count = r.f_count;
    p.regression_capacity_pct = fit.theta0 + fit.theta_lumo * r.lumo_ev + fit.theta_f * r.f_count;

    // Closest observed additive in LUMO, preferring the same F count.
    const SeiRow* anchor = nullptr;
    double best = std::numeric_limits<double>::infinity();
    bool best_same_f = false;
    for (const SeiRow* o : obs) {
      const bool same_f = o->f_count == r.f_count;
      const double dist = std::abs(o->lumo_ev - r.lumo_ev);
      if ((same_f && !best_same_f) || (same_f == best_same_f && dist < best)) {
        anchor = o;
        best = dist;
        best_same_f = same_f;
      }
    }
    p.anchor = anchor->additive;
    p.capacity_pct = *anchor->capacity_pct + fit.theta_lumo * (r.lumo_ev - anchor->lumo_ev) +
                     fit.theta_f * (r.f_count - anchor->f_count);
    fit.predictions.push_back(std::move(p));
  }
  return fit;
}

nlohmann::json SeiFit::to_json() const {
  nlohmann::json j;
  j["theta0"] = theta0;
  j["theta_lumo"] = theta_lumo;
  j["theta_f"] = theta_f;
  j["r2"] = r2;
  j["n_observed"] = n_observed;
  j["predictions"] = nlohmann::json::array();
  for (const auto& p : predictions) {
    j["predictions"].push_back({{"additive", p.additive},
                                {"lumo_ev", p.lumo_ev},
                                {"f_count", p.f_count},
                                {"capacity_pct", p.capacity_pct},
                                {"anchor", p.anchor},
                                {"regression_capacity_pct", p.regression_capacity_pct}});
  }
  return j;
}

}  // namespace cfmsd
