#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cfmsd/flow.hpp"
#include "cfmsd/rng.hpp"
#include "helpers.hpp"

using namespace cfmsd;
using namespace cfmsd::testing;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_against_standard_normal(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double f = normal_cdf(xs[k]);
    worst = std::max({worst, std::abs(f - k / n), std::abs(f - (k + 1) / n)});
  }
  return worst;
}

FlowModel zero_model() {
  FlowModel m;
  m.field = VelocityField::zeros(8);
  return m;
}

Dataset pair_data(std::size_t n, std::uint64_t seed, const std::function<double(double, Rng&)>& child) {
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 2)};
  for (Eigen::Index r = 0; r < d.values.rows(); ++r) {
    const double x = z(rng);
    d.values(r, 0) = x;
    d.values(r, 1) = child(x, rng);
  }
  return d;
}

}  // namespace

TEST(Flow, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  VelocityField field(4, rng);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> c(8), x1(8);
  for (std::size_t k = 0; k < 8; ++k) {
    c[k] = z(rng);
    x1[k] = 0.7 * c[k] + z(rng);
  }
  const FlowBatch batch = make_flow_batch(c, x1, rng);
  std::vector<double> grad;
  const double loss = field.loss_and_gradient(batch, grad);
  EXPECT_DOUBLE_EQ(loss, field.loss(batch));

  std::vector<double> p = field.parameters();
  ASSERT_EQ(grad.size(), p.size());
  ASSERT_EQ(p.size(), field.parameter_count());
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double keep = p[k];
    p[k] = keep + h;
    field.set_parameters(p);
    const double up = field.loss(batch);
    p[k] = keep - h;
    field.set_parameters(p);
    const double down = field.loss(batch);
    p[k] = keep;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(numeric - grad[k]) / std::max(1e-3, std::abs(numeric) + std::abs(grad[k]));
    worst = std::max(worst, rel);
  }
  field.set_parameters(p);
  EXPECT_LT(worst, 1e-4);
}

TEST(Flow, ZeroFieldReproducesBase) {
  const auto xs = sample_conditional(zero_model(), 0.3, 2000, 17);
  EXPECT_EQ(xs.size(), 2000u);
  EXPECT_LT(ks_against_standard_normal(xs), 0.05);
}

TEST(Flow, SamplerBasics) {
  const FlowModel m = zero_model();
  EXPECT_TRUE(sample_conditional(m, 0.0, 0, 1).empty());
  EXPECT_EQ(sample_conditional(m, 0.5, 50, 9), sample_conditional(m, 0.5, 50, 9));
  EXPECT_NE(sample_conditional(m, 0.5, 50, 9), sample_conditional(m, 0.5, 50, 10));
}

TEST(Flow, TrainRejectsSmallData) {
  const Dataset d = pair_data(40, 1, [](double x, Rng&) { return x; });
  EXPECT_THROW(train_flow(d, 0, 1, {}), Error);
  EXPECT_THROW(train_flow(pair_data(100, 1, [](double x, Rng&) { return x; }), 0, 0, {}), Error);
}

TEST(Flow, DivergenceIsReported) {
  FlowConfig cfg;
  cfg.step_size = 1e300;
  cfg.epochs = 5;
  const Dataset d = pair_data(200, 2, [](double x, Rng& r) { return x + std::normal_distribution<double>()(r); });
  EXPECT_THROW(train_flow(d, 0, 1, cfg), Error);
}

TEST(Flow, LinearGaussianConditional) {
  const Dataset d = pair_data(2000, 5, [](double x, Rng& r) { return x + std::normal_distribution<double>()(r); });
  FlowConfig cfg;
  cfg.seed = 5;
  const FlowModel m = train_flow(d, 0, 1, cfg);
  ASSERT_EQ(m.train_loss_trace.size(), cfg.epochs);
  const std::size_t w = cfg.epochs / 10;
  double first = 0.0, last = 0.0;
  for (std::size_t k = 0; k < w; ++k) {
    first += m.train_loss_trace[k];
    last += m.train_loss_trace[cfg.epochs - 1 - k];
  }
  EXPECT_LE(last, first);
  for (double p : m.field.parameters()) ASSERT_TRUE(std::isfinite(p));

  const auto xs = sample_conditional(m, 0.0, 2000, 1);
  EXPECT_NEAR(mean(xs), 0.0, 0.15);
  EXPECT_NEAR(stddev(xs), 1.0, 0.15);
  const auto hi = sample_conditional(m, 1.0, 2000, 2);
  EXPECT_NEAR(mean(hi), 1.0, 0.2);

  // held-out objective improves on the zero field by at least 20%
  const Dataset held = pair_data(1000, 99, [](double x, Rng& r) { return x + std::normal_distribution<double>()(r); });
  FlowModel zero = m;
  zero.field = VelocityField::zeros(cfg.hidden);
  EXPECT_LE(cfm_loss(m, held, 4), 0.8 * cfm_loss(zero, held, 4));
}

TEST(Flow, IndependentPairIgnoresCondition) {
  const Dataset d = pair_data(2000, 6, [](double, Rng& r) { return std::normal_distribution<double>()(r); });
  FlowConfig cfg;
  cfg.seed = 6;
  const FlowModel m = train_flow(d, 0, 1, cfg);
  const double a = mean(sample_conditional(m, 2.0, 2000, 3));
  const double b = mean(sample_conditional(m, -2.0, 2000, 3));
  EXPECT_LT(std::abs(a - b), 0.2);
}

TEST(Flow, SaturatingMechanismMean) {
  const Dataset d =
      pair_data(5000, 7, [](double x, Rng& r) { return std::tanh(x) + std::normal_distribution<double>()(r); });
  FlowConfig cfg;
  cfg.seed = 7;
  const FlowModel m = train_flow(d, 0, 1, cfg);
  EXPECT_NEAR(mean(sample_conditional(m, 3.0, 2000, 4)), std::tanh(3.0), 0.2);
}

TEST(Flow, CapturesBothModes) {
  // X1 | X0 = c is an even mixture of N(c - 2, 0.3^2) and N(c + 2, 0.3^2).
  const Dataset d = pair_data(3000, 8, [](double x, Rng& r) {
    const double mode = std::bernoulli_distribution(0.5)(r) ? 2.0 : -2.0;
    return x + mode + 0.3 * std::normal_distribution<double>()(r);
  });
  FlowConfig cfg;
  cfg.seed = 8;
  cfg.epochs = 300;
  const FlowModel m = train_flow(d, 0, 1, cfg);
  const auto xs = sample_conditional(m, 0.0, 2000, 5);
  const double below = std::count_if(xs.begin(), xs.end(), [](double v) { return v < -1.0; }) / 2000.0;
  const double above = std::count_if(xs.begin(), xs.end(), [](double v) { return v > 1.0; }) / 2000.0;
  EXPECT_GE(below, 0.25);
  EXPECT_GE(above, 0.25);
  EXPECT_GT(bimodality_coefficient(xs), 5.0 / 9.0);

  // A single Gaussian with the same mean and sd puts its mode in the gap.
  const double mu = mean(xs), sd = stddev(xs);
  const double gaussian_gap = normal_cdf((0.5 - mu) / sd) - normal_cdf((-0.5 - mu) / sd);
  const double flow_gap = std::count_if(xs.begin(), xs.end(), [](double v) { return std::abs(v) < 0.5; }) / 2000.0;
  EXPECT_GT(gaussian_gap, 0.15);
  EXPECT_LT(flow_gap, 0.5 * gaussian_gap);
}

TEST(Flow, BimodalityCoefficientReference) {
  Rng rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> g(20000), two(20000);
  for (std::size_t k = 0; k < g.size(); ++k) {
    g[k] = z(rng);
    two[k] = (k % 2 ? 3.0 : -3.0) + 0.5 * z(rng);
  }
  EXPECT_NEAR(bimodality_coefficient(g), 1.0 / 3.0, 0.03);
  EXPECT_GT(bimodality_coefficient(two), 0.8);
}

TEST(Flow, JsonRoundTrip) {
  const Dataset d = pair_data(200, 9, [](double x, Rng&) { return 2 * x; });
  FlowConfig cfg;
  cfg.epochs = 3;
  cfg.hidden = 6;
  const FlowModel m = train_flow(d, 0, 1, cfg);
  const FlowModel back = FlowModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.field.parameters(), m.field.parameters());
  EXPECT_EQ(back.source, 0u);
  EXPECT_EQ(back.target, 1u);
  EXPECT_EQ(sample_conditional(back, 0.4, 20, 3), sample_conditional(m, 0.4, 20, 3));
}
