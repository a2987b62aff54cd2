#include "cfmsd/confound.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cfmsd {

namespace {

double kernel_sum(std::span<const double> a, std::span<const double> b, double inv_two_s2) {
  double s = 0.0;
  for (double x : a) {
    for (double y : b) {
      const double d = x - y;
      s += std::exp(-d * d * inv_two_s2);
    }
  }
  return s;
}

}  // namespace

double mmd2_v_statistic(std::span<const double> p, std::span<const double> q, double bandwidth) {
  if (p.empty() || q.empty()) throw Error("MMD needs two nonempty samples");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw Error("MMD bandwidth must be positive");
  // Fixed argument order so that mmd(p, q) and mmd(q, p) round identically.
  if (std::lexicographical_compare(q.begin(), q.end(), p.begin(), p.end())) std::swap(p, q);
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const double n = static_cast<double>(p.size());
  const double m = static_cast<double>(q.size());
  const double kpp = kernel_sum(p, p, inv) / (n * n);
  const double kpq = kernel_sum(p, q, inv) / (n * m);
  const double kqq = kernel_sum(q, q, inv) / (m * m);
  return std::max(0.0, kpp - 2.0 * kpq + kqq);
}

double median_heuristic_bandwidth(std::span<const double> p, std::span<const double> q) {
  std::vector<double> pooled(p.begin(), p.end());
  pooled.insert(pooled.end(), q.begin(), q.end());
  if (pooled.size() < 2) return 1.0;
  std::vector<double> dist;
  dist.reserve(pooled.size() * (pooled.size() - 1) / 2);
  for (std::size_t a = 0; a < pooled.size(); ++a)
    for (std::size_t b = a + 1; b < pooled.size(); ++b) dist.push_back(std::abs(pooled[a] - pooled[b]));
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double med = *mid;
  if (dist.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(dist.begin(), mid));
  }
  return med > 0.0 ? med : 1.0;
}

double silverman_bandwidth(std::span<const double> xs) {
  if (xs.size() < 2) throw Error("bandwidth needs at least two observations");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw Error("bandwidth undefined for a constant column");
  return 1.06 * sd * std::pow(n, -0.2);
}

WeightedSample weighted_conditional_samples(const Dataset& data, std::size_t i, std::size_t j, double x,
                                            double bandwidth_h) {
  if (data.n() < 10) throw Error("weighted conditional needs n >= 10 rows");
  if (i >= data.d() || j >= data.d()) throw Error("variable index out of range");
  if (!(bandwidth_h > 0.0)) throw Error("KDE bandwidth must be positive");
  const std::size_t n = data.n();
  WeightedSample ws;
  ws.values.resize(n);
  ws.weights.resize(n);
  const double inv = 1.0 / (2.0 * bandwidth_h * bandwidth_h);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    const double dx = data.values(rr, static_cast<Eigen::Index>(i)) - x;
    ws.values[r] = data.values(rr, static_cast<Eigen::Index>(j));
    ws.weights[r] = std::exp(-dx * dx * inv);
    total += ws.weights[r];
  }
  if (!(total > 0.0)) {
    throw Error("degenerate conditioning: all KDE weights underflow at x=" + std::to_string(x) +
                " for variable " + std::to_string(i));
  }
  for (double& w : ws.weights) w /= total;
  return ws;
}

std::vector<double> systematic_resample(const WeightedSample& ws, std::size_t count) {
  std::vector<double> out;
  out.reserve(count);
  if (ws.values.empty()) return out;
  double cum = ws.weights[0];
  std::size_t idx = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(count);
    while (u > cum && idx + 1 < ws.values.size()) cum += ws.weights[++idx];
    out.push_back(ws.values[idx]);
  }
  return out;
}

ConditionalSampler kde_conditional_sampler(const Dataset& data, const ConfoundConfig& config) {
  std::vector<double> bandwidths(data.d());
  for (std::size_t i = 0; i < data.d(); ++i) {
    if (config.kde_bandwidth) {
      bandwidths[i] = *config.kde_bandwidth;
    } else {
      const Eigen::VectorXd col = data.values.col(static_cast<Eigen::Index>(i));
      bandwidths[i] = silverman_bandwidth(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
    }
  }
  return [&data, bandwidths](std::size_t i, std::size_t j, double x, std::size_t count) {
    return systematic_resample(weighted_conditional_samples(data, i, j, x, bandwidths[i]), count);
  };
}

bool MmdMatrix::is_confounded(std::size_t i, std::size_t j) const {
  return std::binary_search(confounded.begin(), confounded.end(), Edge{i, j});
}

nlohmann::json MmdMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < deltas.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < deltas.cols(); ++c) row.push_back(deltas(r, c));
    rows.push_back(row);
  }
  nlohmann::json flagged = nlohmann::json::array();
  for (const Edge& e : confounded) flagged.push_back({e.from, e.to});
  return {{"deltas", rows}, {"tau_c", tau_c}, {"confounded_pairs", flagged}};
}

const InterventionSet& intervention_for(std::span<const InterventionSet> sets, std::size_t i) {
  for (const InterventionSet& s : sets) {
    if (s.target == i) return s;
  }
  throw Error("missing intervention set for variable " + std::to_string(i));
}

MmdMatrix threshold_deltas(Eigen::MatrixXd deltas) {
  MmdMatrix out;
  const Eigen::Index d = deltas.rows();
  std::vector<double> off;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j) off.push_back(deltas(i, j));
  if (!off.empty()) {
    std::vector<double> sorted = off;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    const double median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    const double mean = std::accumulate(off.begin(), off.end(), 0.0) / static_cast<double>(off.size());
    double ss = 0.0;
    for (double v : off) ss += (v - mean) * (v - mean);
    out.tau_c = median + std::sqrt(ss / static_cast<double>(off.size()));
  }
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j && deltas(i, j) > out.tau_c)
        out.confounded.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
  out.deltas = std::move(deltas);
  return out;
}

MmdMatrix detect_confounding(const Dataset& data, std::span<const InterventionSet> interventions,
                             const ConfoundConfig& config, ConditionalSampler sampler) {
  const std::size_t d = data.d();
  if (!sampler) sampler = kde_conditional_sampler(data, config);
  Eigen::MatrixXd deltas = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  std::vector<double> q;
  for (std::size_t i = 0; i < d; ++i) {
    const InterventionSet& set = intervention_for(interventions, i);
    if (set.d() != d) throw Error("intervention set for variable " + std::to_string(i) + " has the wrong width");
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      double agg = 0.0;
      for (std::size_t k = 0; k < set.do_values.size(); ++k) {
        const std::vector<double> p = sampler(i, j, set.do_values[k], config.resample_size);
        const auto col = set.block(k).col(static_cast<Eigen::Index>(j));
        q.assign(col.data(), col.data() + col.size());
        const double bw = config.kernel_bandwidth ? *config.kernel_bandwidth : median_heuristic_bandwidth(p, q);
        const double v = mmd2_v_statistic(p, q, bw);
        agg = config.aggregation == MmdAggregation::Max ? std::max(agg, v) : agg + v;
      }
      if (config.aggregation == MmdAggregation::Mean) agg /= static_cast<double>(set.do_values.size());
      deltas(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = agg;
    }
  }
  return threshold_deltas(std::move(deltas));
}

}  // namespace cfmsd
