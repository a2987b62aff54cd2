#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "cfmsd/graph.hpp"
#include "cfmsd/scm.hpp"

namespace cfmsd::testing {

inline ScmSpec make_spec(Topology kind, double gamma, std::uint64_t seed, Mechanism mech = Mechanism::Linear) {
  ScmSpec s;
  s.graph = canonical_topology(kind);
  s.weights = random_weights(s.graph, seed);
  s.mechanism = mech;
  s.gamma = gamma;
  s.seed = seed;
  return s;
}

// Same graph with every edge weight set to `w`.
inline ScmSpec unit_spec(Topology kind, double gamma, std::uint64_t seed, double w = 1.0) {
  ScmSpec s = make_spec(kind, gamma, seed);
  for (const Edge& e : s.graph.edges()) s.weights(static_cast<Eigen::Index>(e.from), static_cast<Eigen::Index>(e.to)) = w;
  return s;
}

inline double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

inline double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

inline std::vector<double> column(const Eigen::MatrixXd& m, std::size_t j) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, static_cast<Eigen::Index>(j));
  return out;
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace cfmsd::testing
