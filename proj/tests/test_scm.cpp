#include <gtest/gtest.h>

#include <cmath>

#include "cfmsd/scm.hpp"
#include "helpers.hpp"

using namespace cfmsd;
using namespace cfmsd::testing;

TEST(Scm, RandomWeightsSupportAndRange) {
  EXPECT_TRUE(random_weights(Dag(5), 3).isZero());
  const Dag chain = canonical_topology(Topology::Chain);
  const Eigen::MatrixXd w = random_weights(chain, 0);
  EXPECT_EQ(w, random_weights(chain, 0));
  EXPECT_NE(w, random_weights(chain, 1));
  int nonzero = 0;
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) {
      if (chain.has_edge(i, j)) {
        EXPECT_GE(std::abs(w(i, j)), 0.5);
        EXPECT_LE(std::abs(w(i, j)), 1.5);
        ++nonzero;
      } else {
        EXPECT_EQ(w(i, j), 0.0);
      }
    }
  EXPECT_EQ(nonzero, 4);
}

TEST(Scm, SpecValidation) {
  ScmSpec s = unit_spec(Topology::Chain, 0.0, 1);
  EXPECT_NO_THROW(s.validate());
  s.weights(4, 0) = 0.3;  // off-support weight
  EXPECT_THROW(s.validate(), Error);
  s = unit_spec(Topology::Chain, -0.1, 1);
  EXPECT_THROW(s.validate(), Error);
}

TEST(Scm, MechanismTerms) {
  EXPECT_DOUBLE_EQ(mechanism_term(Mechanism::Linear, 0.7, 2.0), 1.4);
  EXPECT_DOUBLE_EQ(mechanism_term(Mechanism::NL1, 0.7, 2.0), 1.4 + 2.0);
  EXPECT_NEAR(mechanism_term(Mechanism::NL2, 0.7, 0.5), 0.35 + 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(mechanism_term(Mechanism::NL3, 0.7, 2.0), std::tanh(1.4));
  EXPECT_DOUBLE_EQ(mechanism_term(Mechanism::NL4, 0.7, -2.0), -1.4 + 1.0);
  for (Mechanism m : {Mechanism::Linear, Mechanism::NL1, Mechanism::NL2, Mechanism::NL3, Mechanism::NL4})
    EXPECT_EQ(parse_mechanism(mechanism_name(m)), m);
}

TEST(Scm, ObservationalMoments) {
  const Dataset d = sample_observational(unit_spec(Topology::Chain, 0.0, 11), 10000);
  EXPECT_EQ(d.n(), 10000u);
  EXPECT_EQ(d.d(), 5u);
  EXPECT_LT(std::abs(mean(column(d.values, 0))), 0.05);
  const double sd1 = stddev(column(d.values, 1));
  EXPECT_NEAR(sd1 * sd1, 2.0, 0.1);
}

TEST(Scm, ConfoundingInflatesForkChildCorrelation) {
  const ScmSpec s0 = unit_spec(Topology::Fork, 0.0, 5);
  ScmSpec s8 = s0;
  s8.gamma = 0.8;
  const Dataset d0 = sample_observational(s0, 5000);
  const Dataset d8 = sample_observational(s8, 5000);
  EXPECT_GT(correlation(column(d8.values, 1), column(d8.values, 2)),
            correlation(column(d0.values, 1), column(d0.values, 2)));
}

TEST(Scm, InterventionMeansAndBlocks) {
  const ScmSpec s = unit_spec(Topology::Chain, 0.0, 2);
  const std::vector<double> xs{2.0, 3.0};
  const InterventionSet set = intervene(s, 0, xs, 20000);
  EXPECT_EQ(set.m(), 40000u);
  EXPECT_EQ(set.per_value_counts, (std::vector<std::size_t>{20000, 20000}));
  const auto b0 = set.block(0);
  EXPECT_NEAR(b0.col(1).mean(), 2.0, 0.05);
  EXPECT_TRUE((b0.col(0).array() == 2.0).all());
  EXPECT_TRUE((set.block(1).col(0).array() == 3.0).all());

  const std::vector<double> five{5.0, 6.0};
  const InterventionSet down = intervene(s, 4, five, 5000);
  EXPECT_LT(std::abs(down.values.col(0).mean()), 0.05);
}

TEST(Scm, HardInterventionColumnConstantUnderConfounding) {
  const ScmSpec s = make_spec(Topology::Fork, 0.8, 9);
  const std::vector<double> xs{-1.0, 0.0, 1.0};
  const InterventionSet set = intervene(s, 1, xs, 100);
  for (std::size_t k = 0; k < xs.size(); ++k) EXPECT_TRUE((set.block(k).col(1).array() == xs[k]).all());
  EXPECT_NO_THROW(set.validate());
}

TEST(Scm, SingleDoValueRejected) {
  const ScmSpec s = unit_spec(Topology::Chain, 0.0, 2);
  const std::vector<double> one{1.0};
  try {
    intervene(s, 0, one, 10);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("single fixed-value intervention"), std::string::npos);
  }
  const std::vector<double> xs{1.0, 2.0};
  EXPECT_THROW(intervene(s, 5, xs, 10), Error);
}

TEST(Scm, NoisySimulator) {
  const ScmSpec s = unit_spec(Topology::Chain, 0.0, 4);
  const std::vector<double> xs{2.0, 3.0};
  const InterventionSet exact = ScmSimulator(s).intervene(0, xs, 500);
  const InterventionSet zero = noisy_simulator(s, 0.0)->intervene(0, xs, 500);
  EXPECT_EQ(exact.values, zero.values);

  const InterventionSet noisy = noisy_simulator(s, 0.1)->intervene(0, xs, 5000);
  EXPECT_NEAR(noisy.block(0).col(1).mean(), 2.0, 0.07);
  EXPECT_TRUE((noisy.block(0).col(0).array() == 2.0).all());
  EXPECT_THROW(NoisySimulator(s, -1.0), Error);
}

TEST(Scm, NonDescendantsInvariantUnderIntervention) {
  const std::size_t m = 2000;
  for (Topology t : kAllTopologies) {
    const ScmSpec s = make_spec(t, 0.5, 21);
    const Dataset obs = sample_observational(s, 20000);
    for (std::size_t i = 0; i < 5; ++i) {
      const std::vector<double> xs{-1.0, 1.0};
      const InterventionSet set = intervene(s, i, xs, m / 2);
      for (std::size_t j = 0; j < 5; ++j) {
        if (j == i || s.graph.reaches(i, j)) continue;
        const double diff = set.values.col(j).mean() - obs.values.col(j).mean();
        // Confounded variables have larger variance, so scale by their sd.
        const double sd = stddev(column(obs.values, j));
        EXPECT_LT(std::abs(diff), 4.0 * sd / std::sqrt(static_cast<double>(m)))
            << topology_name(t) << " do(" << i << ") on " << j;
      }
    }
  }
}

TEST(Scm, LatentIndependentOfDoValue) {
  const ScmSpec s = make_spec(Topology::Fork, 0.8, 13);
  const std::vector<double> xs{-2.0, -1.0, 1.0, 2.0};
  LatentTrace trace;
  const InterventionSet set = intervene(s, 0, xs, 2500, &trace);
  ASSERT_EQ(trace.z.size(), set.m());
  const double r = correlation(trace.z, column(set.values, 0));
  EXPECT_LT(std::abs(r), 0.04);
  // while descendants still carry Z
  EXPECT_GT(correlation(trace.z, column(set.values, 1)), 0.2);
}

TEST(Scm, Determinism) {
  const ScmSpec s = make_spec(Topology::Diamond, 0.4, 77, Mechanism::NL2);
  EXPECT_EQ(sample_observational(s, 300).values, sample_observational(s, 300).values);
  const std::vector<double> xs{0.1, 0.2};
  EXPECT_EQ(intervene(s, 2, xs, 40).values, intervene(s, 2, xs, 40).values);
  ScmSpec other = s;
  other.seed = 78;
  EXPECT_NE(sample_observational(s, 300).values, sample_observational(other, 300).values);
}

TEST(Scm, MarkovChainPartialCorrelation) {
  const Dataset d = sample_observational(make_spec(Topology::Chain, 0.0, 3), 5000);
  const auto x0 = column(d.values, 0), x1 = column(d.values, 1), x2 = column(d.values, 2);
  const double r01 = correlation(x0, x1), r02 = correlation(x0, x2), r12 = correlation(x1, x2);
  const double partial = (r02 - r01 * r12) / std::sqrt((1 - r01 * r01) * (1 - r12 * r12));
  EXPECT_LT(std::abs(partial), 0.05);
}

TEST(Scm, NonlinearSamplesFinite) {
  for (Mechanism m : {Mechanism::NL1, Mechanism::NL2, Mechanism::NL3, Mechanism::NL4})
    for (Topology t : kAllTopologies) {
      const Dataset d = sample_observational(make_spec(t, 0.8, 5, m), 500);
      EXPECT_TRUE(d.values.allFinite());
    }
}
