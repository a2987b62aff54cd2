#pragma once
// Conditional flow matching for one ordered pair (i, j): a small velocity
// field v(x, t, c) is regressed onto the straight-line target x1 - x0 along
// x_t = (1 - t) x0 + t x1, with x0 ~ N(0, 1), x1 = X_j, c = X_i. Samples of
// P(X_j | X_i = c) come from integrating dx/dt = v from t = 0 to t = 1.
//
// Condition and target are standardized with training-set moments; the
// field lives entirely in standardized units.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cfmsd/rng.hpp"
#include "cfmsd/scm.hpp"
#include "json.hpp"

namespace cfmsd {

struct FlowConfig {
  std::size_t hidden = 32;
  std::size_t epochs = 200;
  std::size_t batch = 64;
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t ode_steps = 50;
  std::uint64_t seed = 0;
};

// One minibatch of the regression problem, already standardized.
struct FlowBatch {
  Eigen::VectorXd xt;
  Eigen::VectorXd t;
  Eigen::VectorXd c;
  Eigen::VectorXd target;  // x1 - x0
};

// Draws x0 and t for each (c, x1) pair and forms the interpolant.
FlowBatch make_flow_batch(std::span<const double> c, std::span<const double> x1, Rng& rng);

// Two tanh hidden layers of width H on inputs (x, t, c); linear scalar output.
class VelocityField {
 public:
  VelocityField() = default;
  VelocityField(std::size_t hidden, Rng& rng);
  static VelocityField zeros(std::size_t hidden);

  std::size_t hidden() const { return static_cast<std::size_t>(b1_.size()); }
  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  double operator()(double x, double t, double c) const;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, double t, const Eigen::VectorXd& c) const;

  double loss(const FlowBatch& batch) const;
  // Mean squared error and its gradient w.r.t. parameters() ordering.
  double loss_and_gradient(const FlowBatch& batch, std::vector<double>& grad) const;

  nlohmann::json to_json() const;
  static VelocityField from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd w1_;  // H x 3
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;  // H x H
  Eigen::VectorXd b2_;
  Eigen::RowVectorXd w3_;  // 1 x H
  double b3_ = 0.0;
};

struct FlowModel {
  std::size_t source = 0;  // conditioning variable i
  std::size_t target = 0;  // modelled variable j
  VelocityField field;
  double cond_mean = 0.0, cond_scale = 1.0;
  double target_mean = 0.0, target_scale = 1.0;
  std::vector<double> train_loss_trace;  // mean minibatch loss per epoch
  FlowConfig config;

  nlohmann::json to_json() const;
  static FlowModel from_json(const nlohmann::json& j);
};

FlowModel train_flow(const Dataset& data, std::size_t i, std::size_t j, const FlowConfig& config);

std::vector<double> sample_conditional(const FlowModel& model, double c, std::size_t n_samples,
                                       std::uint64_t seed);

// Monte-Carlo CFM objective of `model` on data rows, in standardized units.
// A zero field gives the baseline E[(x1 - x0)^2].
double cfm_loss(const FlowModel& model, const Dataset& data, std::uint64_t seed, std::size_t draws = 4);

// Sarle's bimodality coefficient; values above 5/9 hint at more than one mode.
double bimodality_coefficient(std::span<const double> xs);

}  // namespace cfmsd
