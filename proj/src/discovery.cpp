#include "cfmsd/discovery.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace cfmsd {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t v) { return static_cast<Idx>(v); }

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::string_view statistic_name(AteStatistic s) {
  switch (s) {
    case AteStatistic::Pooled: return "pooled";
    case AteStatistic::MaxPerValue: return "max-per-value";
    case AteStatistic::Spread: return "spread";
    case AteStatistic::Trend: return "trend";
  }
  return "?";
}

AteStatistic parse_statistic(std::string_view s) {
  for (AteStatistic v : {AteStatistic::Pooled, AteStatistic::MaxPerValue, AteStatistic::Spread, AteStatistic::Trend})
    if (statistic_name(v) == s) return v;
  throw Error("unknown ATE statistic '" + std::string(s) + "'");
}

std::string_view scale_name(ThresholdScale s) {
  return s == ThresholdScale::NoiseCalibrated ? "noise" : "obs-std";
}

ThresholdScale parse_scale(std::string_view s) {
  if (s == "noise") return ThresholdScale::NoiseCalibrated;
  if (s == "obs-std") return ThresholdScale::ObservationalStd;
  throw Error("unknown threshold scale '" + std::string(s) + "'");
}

std::string_view gate_name(ConfoundGate g) { return g == ConfoundGate::Directed ? "directed" : "either"; }

ConfoundGate parse_gate(std::string_view s) {
  if (s == "directed") return ConfoundGate::Directed;
  if (s == "either") return ConfoundGate::EitherDirection;
  throw Error("unknown confounding gate '" + std::string(s) + "'");
}

}  // namespace

std::vector<double> percentile_do_values(const Dataset& data, std::size_t i, std::size_t K) {
  if (K < 2) {
    throw Error("K >= 2 do-values required: a single fixed-value intervention cannot reveal causal influence");
  }
  if (i >= data.d()) throw Error("variable index out of range");
  if (data.n() == 0) throw Error("empty observational data");
  const auto col = data.values.col(ix(i));
  std::vector<double> sorted(col.data(), col.data() + col.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  for (std::size_t k = 1; k <= K; ++k) {
    out.push_back(quantile_sorted(sorted, static_cast<double>(k) / static_cast<double>(K + 1)));
  }
  for (std::size_t k = 1; k < K; ++k) {
    if (!(out[k] > out[k - 1])) {
      throw Error("do-values for variable " + std::to_string(i) + " are not distinct");
    }
  }
  return out;
}

std::vector<InterventionSet> acquire_interventions(const Simulator& simulator, const Dataset& data,
                                                   std::size_t K, std::size_t m_per_value) {
  if (K < 2) {
    throw Error("K >= 2 do-values required: a single fixed-value intervention cannot reveal causal influence");
  }
  if (simulator.d() != data.d()) throw Error("simulator and data disagree on d");
  std::vector<InterventionSet> sets;
  sets.reserve(data.d());
  for (std::size_t i = 0; i < data.d(); ++i) {
    const std::vector<double> xs = percentile_do_values(data, i, K);
    sets.push_back(simulator.intervene(i, xs, m_per_value));
  }
  return sets;
}

AteMatrix compute_ate(const Dataset& data, std::span<const InterventionSet> interventions) {
  const std::size_t d = data.d();
  const double n = static_cast<double>(data.n());
  if (data.n() < 2) throw Error("ATE needs at least two observational rows");
  AteMatrix a;
  a.e = Eigen::MatrixXd::Zero(ix(d), ix(d));
  a.max_per_value = a.e;
  a.spread = a.e;
  a.standard_error = a.e;
  a.trend = a.e;
  a.z = a.e;
  const Eigen::RowVectorXd obs_mean = data.values.colwise().mean();
  a.obs_std = ((data.values.rowwise() - obs_mean).array().square().colwise().sum() / (n - 1.0)).sqrt().transpose();

  for (std::size_t i = 0; i < d; ++i) {
    const InterventionSet& set = intervention_for(interventions, i);
    if (set.d() != d) throw Error("intervention set for variable " + std::to_string(i) + " has the wrong width");
    const std::size_t K = set.do_values.size();
    const Eigen::RowVectorXd pooled = set.values.colwise().mean();
    Eigen::RowVectorXd lo = Eigen::RowVectorXd::Constant(ix(d), std::numeric_limits<double>::infinity());
    Eigen::RowVectorXd hi = -lo;
    Eigen::RowVectorXd max_abs = Eigen::RowVectorXd::Zero(ix(d));
    Eigen::RowVectorXd within_var = Eigen::RowVectorXd::Zero(ix(d));
    double mean_count = 0.0;
    double x_bar = 0.0;
    for (std::size_t k = 0; k < K; ++k) x_bar += set.do_values[k] * static_cast<double>(set.per_value_counts[k]);
    x_bar /= static_cast<double>(set.m());
    double sxx = 0.0;
    Eigen::RowVectorXd sxy = Eigen::RowVectorXd::Zero(ix(d));
    for (std::size_t k = 0; k < K; ++k) {
      const auto blk = set.block(k);
      const Eigen::RowVectorXd mk = blk.colwise().mean();
      const Eigen::RowVectorXd diff = mk - obs_mean;
      lo = lo.cwiseMin(mk);
      hi = hi.cwiseMax(mk);
      max_abs = max_abs.cwiseMax(diff.cwiseAbs());
      const double cnt = static_cast<double>(blk.rows());
      if (cnt > 1.0) {
        within_var += (blk.rowwise() - mk).array().square().colwise().sum().matrix() / (cnt - 1.0);
      }
      mean_count += cnt;
      const double dx = set.do_values[k] - x_bar;
      sxx += cnt * dx * dx;
      sxy += cnt * dx * mk;
    }
    within_var /= static_cast<double>(K);
    mean_count /= static_cast<double>(K);
    const Eigen::RowVectorXd se = (within_var * (1.0 / mean_count + 1.0 / n)).cwiseSqrt();
    const double m_total = static_cast<double>(set.m());
    const Eigen::RowVectorXd int_var =
        (set.values.rowwise() - pooled).array().square().colwise().sum().matrix() / std::max(m_total - 1.0, 1.0);
    const Eigen::RowVectorXd obs_var = a.obs_std.transpose().array().square().matrix();
    const Eigen::RowVectorXd pooled_se = (int_var / m_total + obs_var / n).cwiseSqrt();
    const Eigen::RowVectorXd slope = sxy / sxx;
    const Eigen::RowVectorXd slope_se = (within_var / sxx).cwiseSqrt();
    const double half_range = 0.5 * (set.do_values.back() - set.do_values.front());
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      a.e(ix(i), ix(j)) = pooled(ix(j)) - obs_mean(ix(j));
      a.max_per_value(ix(i), ix(j)) = max_abs(ix(j));
      a.spread(ix(i), ix(j)) = 0.5 * (hi(ix(j)) - lo(ix(j)));
      a.standard_error(ix(i), ix(j)) = se(ix(j));
      a.trend(ix(i), ix(j)) = slope(ix(j)) * half_range;
      const double tiny = std::numeric_limits<double>::min();
      a.z(ix(i), ix(j)) = std::max(std::abs(a.e(ix(i), ix(j))) / std::max(pooled_se(ix(j)), tiny),
                                   std::abs(slope(ix(j))) / std::max(slope_se(ix(j)), tiny));
    }
  }
  if (!a.e.allFinite() || !a.spread.allFinite()) throw Error("non-finite ATE estimate");
  return a;
}

Eigen::MatrixXd decision_statistic(const AteMatrix& ate, AteStatistic kind) {
  const Eigen::MatrixXd pooled = ate.e.cwiseAbs();
  switch (kind) {
    case AteStatistic::Pooled: return pooled;
    case AteStatistic::MaxPerValue: return pooled.cwiseMax(ate.max_per_value);
    case AteStatistic::Spread: return pooled.cwiseMax(ate.spread);
    case AteStatistic::Trend: return ate.z;
  }
  return pooled;
}

DiscoveryConfig DiscoveryConfig::observational_std_defaults() {
  DiscoveryConfig c;
  c.statistic = AteStatistic::MaxPerValue;
  c.scale = ThresholdScale::ObservationalStd;
  c.tau_e = 0.15;
  c.tau_e_plus_factor = 2.0;
  c.tau_4b = 0.15;
  c.gate = ConfoundGate::EitherDirection;
  return c;
}

void DiscoveryConfig::validate() const {
  if (!(tau_e > 0.0)) throw Error("tau_e must be positive");
  if (!(tau_e_plus_factor > 1.0)) throw Error("tau_e_plus must exceed tau_e (factor > 1)");
  if (!(tau_4b > 0.0)) throw Error("tau_4b must be positive");
  if (statistic == AteStatistic::Trend && scale == ThresholdScale::ObservationalStd) {
    throw Error("the trend statistic is a z-score; use noise-calibrated thresholds");
  }
  if (obs_conditional == ObsConditional::Flow && !train_flows) {
    throw Error("flow-based observational conditionals require train_flows");
  }
}

nlohmann::json DiscoveryConfig::to_json() const {
  return {{"statistic", statistic_name(statistic)},
          {"threshold_scale", scale_name(scale)},
          {"tau_e", tau_e},
          {"tau_e_plus_factor", tau_e_plus_factor},
          {"tau_4b", tau_4b},
          {"confound_gate", gate_name(gate)},
          {"skip_confounding", skip_confounding},
          {"train_flows", train_flows},
          {"obs_conditional", obs_conditional == ObsConditional::Kde ? "kde" : "flow"},
          {"mmd_agg", confound.aggregation == MmdAggregation::Mean ? "mean" : "max"},
          {"resample_size", confound.resample_size},
          {"flow",
           {{"hidden", flow.hidden}, {"epochs", flow.epochs}, {"batch", flow.batch},
            {"step_size", flow.step_size}, {"ode_steps", flow.ode_steps}, {"seed", flow.seed}}}};
}

DiscoveryConfig DiscoveryConfig::from_json(const nlohmann::json& j) {
  DiscoveryConfig c;
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "obs-std") {
      c = observational_std_defaults();
    } else if (preset != "default") {
      throw Error("unknown config preset '" + preset + "'");
    }
  }
  if (j.contains("statistic")) c.statistic = parse_statistic(j.at("statistic").get<std::string>());
  if (j.contains("threshold_scale")) c.scale = parse_scale(j.at("threshold_scale").get<std::string>());
  if (j.contains("tau_e")) c.tau_e = j.at("tau_e");
  if (j.contains("tau_e_plus_factor")) c.tau_e_plus_factor = j.at("tau_e_plus_factor");
  if (j.contains("tau_4b")) c.tau_4b = j.at("tau_4b");
  if (j.contains("confound_gate")) c.gate = parse_gate(j.at("confound_gate").get<std::string>());
  if (j.contains("skip_confounding")) c.skip_confounding = j.at("skip_confounding");
  if (j.contains("train_flows")) c.train_flows = j.at("train_flows");
  if (j.contains("obs_conditional")) {
    const auto s = j.at("obs_conditional").get<std::string>();
    if (s != "kde" && s != "flow") throw Error("obs_conditional must be kde or flow");
    c.obs_conditional = s == "kde" ? ObsConditional::Kde : ObsConditional::Flow;
  }
  if (j.contains("mmd_agg")) {
    const auto s = j.at("mmd_agg").get<std::string>();
    if (s != "mean" && s != "max") throw Error("mmd_agg must be mean or max");
    c.confound.aggregation = s == "mean" ? MmdAggregation::Mean : MmdAggregation::Max;
  }
  if (j.contains("resample_size")) c.confound.resample_size = j.at("resample_size");
  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    if (f.contains("hidden")) c.flow.hidden = f.at("hidden");
    if (f.contains("epochs")) c.flow.epochs = f.at("epochs");
    if (f.contains("batch")) c.flow.batch = f.at("batch");
    if (f.contains("step_size")) c.flow.step_size = f.at("step_size");
    if (f.contains("ode_steps")) c.flow.ode_steps = f.at("ode_steps");
    if (f.contains("seed")) c.flow.seed = f.at("seed");
  }
  c.validate();
  return c;
}

ThresholdMatrices ThresholdMatrices::uniform(std::size_t d, double tau_e, double tau_e_plus, double tau_4b) {
  return {Eigen::MatrixXd::Constant(ix(d), ix(d), tau_e), Eigen::MatrixXd::Constant(ix(d), ix(d), tau_e_plus),
          Eigen::MatrixXd::Constant(ix(d), ix(d), tau_4b)};
}

ThresholdMatrices thresholds(const AteMatrix& ate, const DiscoveryConfig& config) {
  config.validate();
  const auto d = ix(ate.d());
  Eigen::MatrixXd scale(d, d);
  if (config.scale == ThresholdScale::NoiseCalibrated) {
    if (config.statistic == AteStatistic::Trend) {
      scale.setOnes();
    } else {
      scale = ate.standard_error;
    }
  } else {
    scale = ate.obs_std.transpose().replicate(d, 1);
  }
  return {config.tau_e * scale, config.tau_e * config.tau_e_plus_factor * scale, config.tau_4b * scale};
}

Adjacency direction_phase(const Eigen::MatrixXd& stat, std::span<const Edge> confounded,
                          const ThresholdMatrices& tau, ConfoundGate gate) {
  const std::size_t d = static_cast<std::size_t>(stat.rows());
  auto flagged = [&](std::size_t a, std::size_t b) {
    return std::find(confounded.begin(), confounded.end(), Edge{a, b}) != confounded.end();
  };
  Adjacency out(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double sij = std::abs(stat(ix(i), ix(j)));
      const double sji = std::abs(stat(ix(j), ix(i)));
      const std::size_t a = sij >= sji ? i : j;
      const std::size_t b = sij >= sji ? j : i;
      const bool gated = gate == ConfoundGate::Directed ? flagged(a, b) : (flagged(i, j) || flagged(j, i));
      const double t = gated ? tau.tau_e_plus(ix(a), ix(b)) : tau.tau_e(ix(a), ix(b));
      if (std::max(sij, sji) > t) out.set(a, b);
    }
  }
  return out;
}

Adjacency direction_phase(const Eigen::MatrixXd& stat, std::span<const Edge> confounded, double tau_e,
                          double tau_e_plus, ConfoundGate gate) {
  if (!(tau_e > 0.0) || !(tau_e_plus > tau_e)) throw Error("thresholds must satisfy tau_e_plus > tau_e > 0");
  return direction_phase(stat, confounded,
                         ThresholdMatrices::uniform(static_cast<std::size_t>(stat.rows()), tau_e, tau_e_plus, tau_e),
                         gate);
}

FilterResult icp_filter(const Adjacency& candidates, const Eigen::MatrixXd& stat, const Eigen::MatrixXd& tau_4b) {
  const std::size_t d = candidates.d();
  FilterResult out{candidates, {}};
  auto hop = [&](std::size_t a, std::size_t b) {
    return a != b && std::abs(stat(ix(a), ix(b))) > tau_4b(ix(a), ix(b));
  };
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<std::size_t> kids;
    for (std::size_t j = 0; j < d; ++j)
      if (j != i && candidates.has(i, j)) kids.push_back(j);
    if (kids.size() < 2) continue;
    std::stable_sort(kids.begin(), kids.end(), [&](std::size_t x, std::size_t y) {
      return std::abs(stat(ix(i), ix(x))) > std::abs(stat(ix(i), ix(y)));
    });

    // Nodes reachable from the kept children without passing through i.
    std::vector<unsigned char> reach(d, 0);
    auto absorb = [&](std::size_t k) {
      std::vector<std::size_t> stack{k};
      reach[k] = 1;
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < d; ++v) {
          if (v == i || reach[v] || !hop(u, v)) continue;
          reach[v] = 1;
          stack.push_back(v);
        }
      }
    };
    absorb(kids.front());
    for (std::size_t q = 1; q < kids.size(); ++q) {
      const std::size_t j = kids[q];
      if (reach[j]) {
        out.graph.set(i, j, false);
        out.removed.push_back({i, j});
      } else {
        absorb(j);
      }
    }
  }
  std::sort(out.removed.begin(), out.removed.end());
  return out;
}

FilterResult icp_filter(const Adjacency& candidates, const Eigen::MatrixXd& stat, double tau_4b) {
  if (!(tau_4b > 0.0)) throw Error("tau_4b must be positive");
  return icp_filter(candidates, stat, Eigen::MatrixXd::Constant(stat.rows(), stat.cols(), tau_4b));
}

DagRepair enforce_dag(const Adjacency& candidates, const Eigen::MatrixXd& stat) {
  Adjacency g = candidates;
  std::vector<Edge> removed;
  for (std::size_t i = 0; i < g.d(); ++i) {
    if (g.has(i, i)) {
      g.set(i, i, false);
      removed.push_back({i, i});
    }
  }
  while (auto cycle = find_cycle(g)) {
    Edge weakest = cycle->front();
    for (const Edge& e : *cycle) {
      const double s = std::abs(stat(ix(e.from), ix(e.to)));
      const double w = std::abs(stat(ix(weakest.from), ix(weakest.to)));
      if (s < w || (s == w && e < weakest)) weakest = e;
    }
    g.set(weakest.from, weakest.to, false);
    removed.push_back(weakest);
  }
  return {Dag(std::move(g)), std::move(removed)};
}

DiscoveryResult discover(const Dataset& data, std::span<const InterventionSet> interventions,
                         const DiscoveryConfig& config) {
  config.validate();
  const std::size_t d = data.d();
  if (d == 0) throw Error("data has no variables");
  for (const InterventionSet& s : interventions) {
    if (s.d() != d) throw Error("inconsistent d between observational and interventional data");
    s.validate();
  }

  DiscoveryResult r;
  r.config = config;

  if (config.train_flows) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (i != j) r.flows.push_back(train_flow(data, i, j, config.flow));
  }

  if (config.skip_confounding || d < 2) {
    r.mmd = threshold_deltas(Eigen::MatrixXd::Zero(ix(d), ix(d)));
    r.mmd.confounded.clear();
  } else {
    ConditionalSampler sampler;
    if (config.obs_conditional == ObsConditional::Flow) {
      sampler = [&r, d, seed = config.flow.seed](std::size_t i, std::size_t j, double x, std::size_t count) {
        const std::size_t slot = i * (d - 1) + (j < i ? j : j - 1);
        return sample_conditional(r.flows.at(slot), x, count, mix_seed(seed, {i, j, std::bit_cast<std::uint64_t>(x)}));
      };
    }
    r.mmd = detect_confounding(data, interventions, config.confound, sampler);
  }

  r.ate = compute_ate(data, interventions);
  r.statistic = decision_statistic(r.ate, config.statistic);
  r.tau = thresholds(r.ate, config);
  r.candidates = direction_phase(r.statistic, r.mmd.confounded, r.tau, config.gate);
  FilterResult filtered = icp_filter(r.candidates, r.statistic, r.tau.tau_4b);
  r.removed_indirect = std::move(filtered.removed);
  DagRepair repaired = enforce_dag(filtered.graph, r.statistic);
  r.graph = std::move(repaired.graph);
  r.removed_cycles = std::move(repaired.removed);
  return r;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Idx r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Idx c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json DiscoveryResult::to_json() const {
  auto edge_list = [](std::span<const Edge> es) {
    nlohmann::json a = nlohmann::json::array();
    for (const Edge& e : es) a.push_back({e.from, e.to});
    return a;
  };
  nlohmann::json j;
  j["graph"] = cfmsd::to_json(graph.adjacency());
  j["candidates"] = cfmsd::to_json(candidates);
  j["ate"] = {{"pooled", matrix_to_json(ate.e)},
              {"max_per_value", matrix_to_json(ate.max_per_value)},
              {"spread", matrix_to_json(ate.spread)},
              {"standard_error", matrix_to_json(ate.standard_error)},
              {"trend", matrix_to_json(ate.trend)},
              {"z", matrix_to_json(ate.z)},
              {"decision_statistic", matrix_to_json(statistic)}};
  j["mmd"] = mmd.to_json();
  j["thresholds"] = {{"tau_e", matrix_to_json(tau.tau_e)},
                     {"tau_e_plus", matrix_to_json(tau.tau_e_plus)},
                     {"tau_4b", matrix_to_json(tau.tau_4b)}};
  const auto removed_indirect_json = edge_list(removed_indirect);
  const auto removed_cycles_json = edge_list(removed_cycles);
  j["removed_indirect"] = removed_indirect_json;
  j["removed_cycles"] = removed_cycles_json;
  j["config"] = config.to_json();
  if (!flows.empty()) {
    nlohmann::json fl = nlohmann::json::array();
    for (const FlowModel& f : flows) fl.push_back(f.to_json());
    j["flows"] = fl;
  }
  return j;
}

}  // namespace cfmsd
