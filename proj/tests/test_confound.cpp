#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cfmsd/confound.hpp"
#include "cfmsd/discovery.hpp"
#include "helpers.hpp"

using namespace cfmsd;
using namespace cfmsd::testing;

namespace {

std::vector<InterventionSet> interventions_for(const ScmSpec& s, const Dataset& obs) {
  return acquire_interventions(ScmSimulator(s), obs, 4, 50);
}

}  // namespace

TEST(Mmd, IdenticalSamplesGiveZero) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_EQ(mmd2_v_statistic(a, a, 1.0), 0.0);
  const std::vector<double> z{0};
  EXPECT_EQ(mmd2_v_statistic(z, z, 1.0), 0.0);
  const std::vector<double> shuffled{3, 1, 2};
  EXPECT_NEAR(mmd2_v_statistic(a, shuffled, 0.7), 0.0, 1e-15);
}

TEST(Mmd, HandComputedPair) {
  const std::vector<double> p{0, 0}, q{1, 1};
  EXPECT_NEAR(mmd2_v_statistic(p, q, 1.0), 1.0 - 2.0 * std::exp(-0.5) + 1.0, 1e-12);
}

TEST(Mmd, SymmetricAndNonnegative) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(1 + trial % 13), q(1 + trial % 7);
    for (double& v : p) v = z(rng);
    for (double& v : q) v = 0.5 + z(rng);
    const double bw = 0.2 + (trial % 5);
    const double pq = mmd2_v_statistic(p, q, bw);
    EXPECT_DOUBLE_EQ(pq, mmd2_v_statistic(q, p, bw));
    EXPECT_GE(pq, 0.0);
  }
}

TEST(Mmd, Errors) {
  const std::vector<double> a{1}, empty;
  EXPECT_THROW(mmd2_v_statistic(a, empty, 1.0), Error);
  EXPECT_THROW(mmd2_v_statistic(a, a, 0.0), Error);
  EXPECT_THROW(mmd2_v_statistic(a, a, -1.0), Error);
}

TEST(Mmd, Bandwidths) {
  const std::vector<double> p{0, 1}, q{3};
  // pooled distances 1, 3, 2 -> median 2
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(p, q), 2.0);
  const std::vector<double> same{1, 1};
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(same, same), 1.0);
  const std::vector<double> xs{1, 2, 3, 4, 5};
  EXPECT_NEAR(silverman_bandwidth(xs), 1.06 * std::sqrt(2.5) * std::pow(5.0, -0.2), 1e-12);
}

TEST(WeightedConditional, WideBandwidthIsUniform) {
  const Dataset d = sample_observational(unit_spec(Topology::Chain, 0.0, 1), 50);
  const WeightedSample ws = weighted_conditional_samples(d, 0, 1, 0.3, 1e12);
  for (double w : ws.weights) EXPECT_NEAR(w, 1.0 / 50, 1e-12);
}

TEST(WeightedConditional, NarrowBandwidthSelectsRows) {
  Dataset d{Eigen::MatrixXd(20, 2)};
  for (Eigen::Index r = 0; r < 20; ++r) {
    d.values(r, 0) = r % 2 ? 10.0 : 0.0;
    d.values(r, 1) = r % 2 ? 100.0 : -1.0;
  }
  const WeightedSample ws = weighted_conditional_samples(d, 0, 1, 0.0, 0.5);
  double mass = 0.0;
  for (std::size_t k = 0; k < ws.values.size(); ++k)
    if (ws.values[k] == -1.0) mass += ws.weights[k];
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_THROW(weighted_conditional_samples(d, 0, 1, 1e6, 0.5), Error);
}

TEST(WeightedConditional, LinearConditionalMean) {
  const Dataset d = sample_observational(unit_spec(Topology::Chain, 0.0, 2), 2000);
  const WeightedSample ws = weighted_conditional_samples(d, 0, 1, 1.0, silverman_bandwidth(column(d.values, 0)));
  double m = 0.0;
  for (std::size_t k = 0; k < ws.values.size(); ++k) m += ws.values[k] * ws.weights[k];
  EXPECT_NEAR(m, 1.0, 0.1);
}

TEST(WeightedConditional, SystematicResample) {
  WeightedSample ws{{1.0, 2.0, 3.0, 4.0}, {0.25, 0.25, 0.25, 0.25}};
  EXPECT_EQ(systematic_resample(ws, 4), (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
  ws.weights = {0.0, 1.0, 0.0, 0.0};
  EXPECT_EQ(systematic_resample(ws, 5), std::vector<double>(5, 2.0));
  ws.weights = {0.5, 0.0, 0.0, 0.5};
  const auto r = systematic_resample(ws, 200);
  EXPECT_EQ(std::count(r.begin(), r.end(), 1.0), 100);
  EXPECT_EQ(std::count(r.begin(), r.end(), 4.0), 100);
}

TEST(Threshold, EqualDeltasFlagNothing) {
  Eigen::MatrixXd deltas(2, 2);
  deltas << 0, 0.3, 0.3, 0;
  const MmdMatrix m = threshold_deltas(deltas);
  EXPECT_DOUBLE_EQ(m.tau_c, 0.3);
  EXPECT_TRUE(m.confounded.empty());
}

TEST(Threshold, MedianPlusPopulationStd) {
  Eigen::MatrixXd deltas = Eigen::MatrixXd::Zero(3, 3);
  // off-diagonal values 1..6: median 3.5, population sd sqrt(35/12)
  deltas << 0, 1, 2, 3, 0, 4, 5, 6, 0;
  const MmdMatrix m = threshold_deltas(deltas);
  EXPECT_NEAR(m.tau_c, 3.5 + std::sqrt(35.0 / 12.0), 1e-12);
  // only 6 clears 5.21
  ASSERT_EQ(m.confounded.size(), 1u);
  EXPECT_TRUE(m.is_confounded(2, 1));
  EXPECT_FALSE(m.is_confounded(2, 0));
  const auto j = m.to_json();
  EXPECT_EQ(j.at("confounded_pairs").size(), 1u);
}

TEST(DetectConfounding, MissingSetIsNamed) {
  const ScmSpec s = make_spec(Topology::Chain, 0.0, 1);
  const Dataset obs = sample_observational(s, 200);
  auto ints = interventions_for(s, obs);
  ints.erase(ints.begin() + 2);
  try {
    detect_confounding(obs, ints);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("variable 2"), std::string::npos);
  }
}

TEST(DetectConfounding, UnconfoundedChainEdgeNotFlagged) {
  int clean = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ScmSpec s = make_spec(Topology::Chain, 0.0, 100 + seed);
    const Dataset obs = sample_observational(s, 500);
    const MmdMatrix m = detect_confounding(obs, interventions_for(s, obs));
    clean += !m.is_confounded(0, 1);
  }
  EXPECT_GE(clean, 4);
}

TEST(DetectConfounding, ConfoundedForkChildrenFlagged) {
  int flagged = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ScmSpec s = make_spec(Topology::Fork, 0.8, seed);
    const Dataset obs = sample_observational(s, 500);
    const MmdMatrix m = detect_confounding(obs, interventions_for(s, obs));
    flagged += m.is_confounded(1, 2);
  }
  EXPECT_GE(flagged, 4);
}

TEST(DetectConfounding, FalsePositiveRateAtGammaZero) {
  std::size_t flagged = 0, total = 0;
  for (Topology t : kAllTopologies)
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const ScmSpec s = make_spec(t, 0.0, 300 + seed);
      const Dataset obs = sample_observational(s, 500);
      const MmdMatrix m = detect_confounding(obs, interventions_for(s, obs));
      flagged += m.confounded.size();
      total += 20;
    }
  EXPECT_LE(static_cast<double>(flagged) / total, 0.5);
}

TEST(DetectConfounding, MaxAggregationDominatesMean) {
  const ScmSpec s = make_spec(Topology::Diamond, 0.4, 9);
  const Dataset obs = sample_observational(s, 500);
  const auto ints = interventions_for(s, obs);
  ConfoundConfig cfg;
  const MmdMatrix mean_m = detect_confounding(obs, ints, cfg);
  cfg.aggregation = MmdAggregation::Max;
  const MmdMatrix max_m = detect_confounding(obs, ints, cfg);
  EXPECT_TRUE((max_m.deltas.array() >= mean_m.deltas.array() - 1e-15).all());
}
