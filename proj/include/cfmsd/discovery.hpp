#pragma once
// Structure discovery from observational data plus one interventional set
// per variable:
//   acquisition   round-robin hard interventions at observational percentiles
//   confounding   KDE-vs-do MMD gaps with an adaptive threshold
//   direction     total effects of do(X_i) on X_j; the stronger direction wins
//                 if it clears tau_e (tau_e^+ on confounded pairs)
//   direct edges  drop i->j when an already-kept child of i reaches j
//   acyclicity    break remaining cycles at their weakest effect

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cfmsd/confound.hpp"
#include "cfmsd/flow.hpp"
#include "cfmsd/graph.hpp"
#include "cfmsd/scm.hpp"
#include "json.hpp"

namespace cfmsd {

// Do-values at the interior percentiles 100 k / (K + 1), k = 1..K, of each
// observational column; one intervention set per variable in index order.
std::vector<double> percentile_do_values(const Dataset& data, std::size_t i, std::size_t K);

std::vector<InterventionSet> acquire_interventions(const Simulator& simulator, const Dataset& data,
                                                   std::size_t K = 4, std::size_t m_per_value = 50);

// Effect of intervening on i (row) on the mean of j (column).
struct AteMatrix {
  Eigen::MatrixXd e;               // pooled: E_int(i)[X_j] - E_obs[X_j]
  Eigen::MatrixXd max_per_value;   // max_k |E[X_j | do(X_i = x_k)] - E_obs[X_j]|
  Eigen::MatrixXd spread;          // (max_k - min_k) / 2 of the per-value means
  Eigen::MatrixXd standard_error;  // sd of one per-value mean difference
  // Least-squares slope of the per-value means on the do-values, expressed
  // as the fitted change over half the do-value range.
  Eigen::MatrixXd trend;
  // max(|pooled| / se, |trend| / se): the larger of the two z-scores
  Eigen::MatrixXd z;
  Eigen::VectorXd obs_std;         // observational std of each X_j

  std::size_t d() const { return static_cast<std::size_t>(e.rows()); }
};

AteMatrix compute_ate(const Dataset& data, std::span<const InterventionSet> interventions);

enum class AteStatistic {
  Pooled,       // |e|
  MaxPerValue,  // max(|e|, max_per_value)
  Spread,       // max(|e|, spread)
  Trend,        // z, in standard-error units
};

enum class ThresholdScale {
  NoiseCalibrated,  // tau = coefficient * standard_error(i, j); plain coefficient for Trend
  ObservationalStd  // tau = coefficient * obs_std(j)
};

enum class ConfoundGate {
  Directed,        // stricter threshold when the proposed direction (i, j) is flagged
  EitherDirection  // stricter threshold when (i, j) or (j, i) is flagged
};

enum class ObsConditional { Kde, Flow };

Eigen::MatrixXd decision_statistic(const AteMatrix& ate, AteStatistic kind);

struct DiscoveryConfig {
  AteStatistic statistic = AteStatistic::Trend;
  ThresholdScale scale = ThresholdScale::NoiseCalibrated;
  double tau_e = 2.5;
  double tau_e_plus_factor = 2.0;  // tau_e^+ = factor * tau_e
  double tau_4b = 3.0;
  ConfoundGate gate = ConfoundGate::Directed;
  bool skip_confounding = false;
  bool train_flows = false;
  ObsConditional obs_conditional = ObsConditional::Kde;
  FlowConfig flow;
  ConfoundConfig confound;

  // Thresholds as multiples of obs_std(j): 0.15, 0.30, 0.15 with the plain
  // max-per-value statistic and the two-sided confounding gate.
  static DiscoveryConfig observational_std_defaults();

  void validate() const;
  nlohmann::json to_json() const;
  static DiscoveryConfig from_json(const nlohmann::json& j);
};

struct ThresholdMatrices {
  Eigen::MatrixXd tau_e;
  Eigen::MatrixXd tau_e_plus;
  Eigen::MatrixXd tau_4b;

  static ThresholdMatrices uniform(std::size_t d, double tau_e, double tau_e_plus, double tau_4b);
};

ThresholdMatrices thresholds(const AteMatrix& ate, const DiscoveryConfig& config);

// One edge per unordered pair whose stronger direction clears its threshold.
// Ties in |stat| go to the lower source index.
Adjacency direction_phase(const Eigen::MatrixXd& stat, std::span<const Edge> confounded,
                          const ThresholdMatrices& tau, ConfoundGate gate = ConfoundGate::Directed);
Adjacency direction_phase(const Eigen::MatrixXd& stat, std::span<const Edge> confounded, double tau_e,
                          double tau_e_plus, ConfoundGate gate = ConfoundGate::Directed);

struct FilterResult {
  Adjacency graph;
  std::vector<Edge> removed;
};

// For each source with two or more candidates, children are visited in
// decreasing |stat|. A child j is dropped as indirect when some child kept
// earlier reaches j through pairs whose |stat| exceeds tau_4b.
FilterResult icp_filter(const Adjacency& candidates, const Eigen::MatrixXd& stat, const Eigen::MatrixXd& tau_4b);
FilterResult icp_filter(const Adjacency& candidates, const Eigen::MatrixXd& stat, double tau_4b);

struct DagRepair {
  Dag graph;
  std::vector<Edge> removed;
};

// Repeatedly removes the weakest |stat| edge (ties: smallest (i, j)) on some cycle.
DagRepair enforce_dag(const Adjacency& candidates, const Eigen::MatrixXd& stat);

struct DiscoveryResult {
  Dag graph;
  AteMatrix ate;
  Eigen::MatrixXd statistic;
  MmdMatrix mmd;
  ThresholdMatrices tau;
  Adjacency candidates;
  std::vector<Edge> removed_indirect;
  std::vector<Edge> removed_cycles;
  std::vector<FlowModel> flows;
  DiscoveryConfig config;

  nlohmann::json to_json() const;
};

DiscoveryResult discover(const Dataset& data, std::span<const InterventionSet> interventions,
                         const DiscoveryConfig& config = {});

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);

}  // namespace cfmsd
