#pragma once
// Latent-confounder detection. For each ordered pair (i, j) and each
// do-value x of X_i, the observational conditional P(X_j | X_i = x)
// (kernel-weighted rows of the observational data) is compared with the
// interventional P(X_j | do(X_i = x)) by an RBF-kernel MMD. Without a
// confounder the two agree; a backdoor X_i <- Z -> X_j pulls them apart.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cfmsd/graph.hpp"
#include "cfmsd/scm.hpp"
#include "json.hpp"

namespace cfmsd {

// Squared MMD, V-statistic form (diagonal kernel terms included):
//   1/n^2 sum k(x,x') - 2/(nm) sum k(x,y) + 1/m^2 sum k(y,y'),
// k(x,y) = exp(-(x-y)^2 / (2 sigma^2)). Clamped at zero.
double mmd2_v_statistic(std::span<const double> p, std::span<const double> q, double bandwidth);

// Median of all pooled pairwise distances; 1.0 when that median is zero.
double median_heuristic_bandwidth(std::span<const double> p, std::span<const double> q);

// 1.06 * sd * n^(-1/5).
double silverman_bandwidth(std::span<const double> xs);

struct WeightedSample {
  std::vector<double> values;
  std::vector<double> weights;  // nonnegative, sums to 1
};

// X_j column weighted by exp(-(X_i - x)^2 / (2 h^2)).
WeightedSample weighted_conditional_samples(const Dataset& data, std::size_t i, std::size_t j, double x,
                                            double bandwidth_h);

// Deterministic systematic resampling to `count` equal-weight draws.
std::vector<double> systematic_resample(const WeightedSample& ws, std::size_t count);

enum class MmdAggregation { Mean, Max };

struct ConfoundConfig {
  std::size_t resample_size = 200;
  MmdAggregation aggregation = MmdAggregation::Mean;
  std::optional<double> kde_bandwidth;     // default: Silverman on X_i
  std::optional<double> kernel_bandwidth;  // default: median heuristic per comparison
};

// Produces `count` draws from an estimate of P(X_j | X_i = x).
using ConditionalSampler =
    std::function<std::vector<double>(std::size_t i, std::size_t j, double x, std::size_t count)>;

ConditionalSampler kde_conditional_sampler(const Dataset& data, const ConfoundConfig& config);

struct MmdMatrix {
  Eigen::MatrixXd deltas;  // d x d, diagonal zero
  double tau_c = 0.0;
  std::vector<Edge> confounded;  // ordered pairs with delta > tau_c, sorted

  bool is_confounded(std::size_t i, std::size_t j) const;
  nlohmann::json to_json() const;
};

// Looks up the intervention set whose target is `i`; throws when absent.
const InterventionSet& intervention_for(std::span<const InterventionSet> sets, std::size_t i);

// tau_c = median + (population) std of the off-diagonal deltas.
MmdMatrix threshold_deltas(Eigen::MatrixXd deltas);

MmdMatrix detect_confounding(const Dataset& data, std::span<const InterventionSet> interventions,
                             const ConfoundConfig& config = {}, ConditionalSampler sampler = {});

}  // namespace cfmsd
