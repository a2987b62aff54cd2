#include "cfmsd/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cfmsd {

FlowBatch make_flow_batch(std::span<const double> c, std::span<const double> x1, Rng& rng) {
  const auto b = static_cast<Eigen::Index>(c.size());
  std::normal_distribution<double> base(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FlowBatch out{Eigen::VectorXd(b), Eigen::VectorXd(b), Eigen::VectorXd(b), Eigen::VectorXd(b)};
  for (Eigen::Index r = 0; r < b; ++r) {
    const double x0 = base(rng);
    const double t = unit(rng);
    const double y = x1[static_cast<std::size_t>(r)];
    out.xt(r) = (1.0 - t) * x0 + t * y;
    out.t(r) = t;
    out.c(r) = c[static_cast<std::size_t>(r)];
    out.target(r) = y - x0;
  }
  return out;
}

VelocityField::VelocityField(std::size_t hidden, Rng& rng) {
  const auto h = static_cast<Eigen::Index>(hidden);
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index q = 0; q < cols; ++q) m(r, q) = limit * u(rng);
    return m;
  };
  w1_ = glorot(h, 3);
  b1_ = Eigen::VectorXd::Zero(h);
  w2_ = glorot(h, h);
  b2_ = Eigen::VectorXd::Zero(h);
  w3_ = glorot(1, h);
  b3_ = 0.0;
}

VelocityField VelocityField::zeros(std::size_t hidden) {
  VelocityField f;
  const auto h = static_cast<Eigen::Index>(hidden);
  f.w1_ = Eigen::MatrixXd::Zero(h, 3);
  f.b1_ = Eigen::VectorXd::Zero(h);
  f.w2_ = Eigen::MatrixXd::Zero(h, h);
  f.b2_ = Eigen::VectorXd::Zero(h);
  f.w3_ = Eigen::RowVectorXd::Zero(h);
  f.b3_ = 0.0;
  return f;
}

std::size_t VelocityField::parameter_count() const {
  const std::size_t h = hidden();
  return 3 * h + h + h * h + h + h + 1;
}

// Flat layout: w1 (column-major), b1, w2 (column-major), b2, w3, b3.
std::vector<double> VelocityField::parameters() const {
  std::vector<double> p;
  p.reserve(parameter_count());
  auto append = [&](const auto& m) { p.insert(p.end(), m.data(), m.data() + m.size()); };
  append(w1_);
  append(b1_);
  append(w2_);
  append(b2_);
  append(w3_);
  p.push_back(b3_);
  return p;
}

void VelocityField::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw Error("parameter vector has the wrong length");
  const double* src = flat.data();
  auto take = [&](auto& m) {
    std::copy(src, src + m.size(), m.data());
    src += m.size();
  };
  take(w1_);
  take(b1_);
  take(w2_);
  take(b2_);
  take(w3_);
  b3_ = *src;
}

double VelocityField::operator()(double x, double t, double c) const {
  const Eigen::Vector3d in(x, t, c);
  const Eigen::VectorXd h1 = (w1_ * in + b1_).array().tanh();
  const Eigen::VectorXd h2 = (w2_ * h1 + b2_).array().tanh();
  return w3_.dot(h2) + b3_;
}

Eigen::VectorXd VelocityField::evaluate(const Eigen::VectorXd& x, double t, const Eigen::VectorXd& c) const {
  Eigen::MatrixXd in(3, x.size());
  in.row(0) = x.transpose();
  in.row(1).setConstant(t);
  in.row(2) = c.transpose();
  const Eigen::MatrixXd h1 = ((w1_ * in).colwise() + b1_).array().tanh();
  const Eigen::MatrixXd h2 = ((w2_ * h1).colwise() + b2_).array().tanh();
  return ((w3_ * h2).array() + b3_).transpose();
}

double VelocityField::loss(const FlowBatch& batch) const {
  const auto n = batch.xt.size();
  Eigen::MatrixXd in(3, n);
  in.row(0) = batch.xt.transpose();
  in.row(1) = batch.t.transpose();
  in.row(2) = batch.c.transpose();
  const Eigen::MatrixXd h1 = ((w1_ * in).colwise() + b1_).array().tanh();
  const Eigen::MatrixXd h2 = ((w2_ * h1).colwise() + b2_).array().tanh();
  const Eigen::RowVectorXd out = (w3_ * h2).array() + b3_;
  return (out.transpose() - batch.target).squaredNorm() / static_cast<double>(n);
}

double VelocityField::loss_and_gradient(const FlowBatch& batch, std::vector<double>& grad) const {
  const auto n = batch.xt.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd in(3, n);
  in.row(0) = batch.xt.transpose();
  in.row(1) = batch.t.transpose();
  in.row(2) = batch.c.transpose();
  const Eigen::MatrixXd h1 = ((w1_ * in).colwise() + b1_).array().tanh();
  const Eigen::MatrixXd h2 = ((w2_ * h1).colwise() + b2_).array().tanh();
  const Eigen::RowVectorXd out = (w3_ * h2).array() + b3_;
  const Eigen::RowVectorXd resid = out - batch.target.transpose();
  const double loss = resid.squaredNorm() * inv_n;

  // d loss / d out = 2 * resid / n
  const Eigen::RowVectorXd d_out = 2.0 * inv_n * resid;
  const Eigen::RowVectorXd g_w3 = d_out * h2.transpose();
  const double g_b3 = d_out.sum();
  const Eigen::MatrixXd d_a2 = (w3_.transpose() * d_out).array() * (1.0 - h2.array().square());
  const Eigen::MatrixXd g_w2 = d_a2 * h1.transpose();
  const Eigen::VectorXd g_b2 = d_a2.rowwise().sum();
  const Eigen::MatrixXd d_a1 = (w2_.transpose() * d_a2).array() * (1.0 - h1.array().square());
  const Eigen::MatrixXd g_w1 = d_a1 * in.transpose();
  const Eigen::VectorXd g_b1 = d_a1.rowwise().sum();

  grad.clear();
  grad.reserve(parameter_count());
  auto append = [&](const auto& m) { grad.insert(grad.end(), m.data(), m.data() + m.size()); };
  append(g_w1);
  append(g_b1);
  append(g_w2);
  append(g_b2);
  append(g_w3);
  grad.push_back(g_b3);
  return loss;
}

nlohmann::json VelocityField::to_json() const {
  return {{"architecture", "mlp-tanh"},
          {"inputs", {"x", "t", "c"}},
          {"hidden", hidden()},
          {"layout", {{"w1", {hidden(), 3}}, {"b1", {hidden()}}, {"w2", {hidden(), hidden()}},
                      {"b2", {hidden()}}, {"w3", {1, hidden()}}, {"b3", {1}}}},
          {"order", "column-major"},
          {"params", parameters()}};
}

VelocityField VelocityField::from_json(const nlohmann::json& j) {
  VelocityField f = zeros(j.at("hidden").get<std::size_t>());
  f.set_parameters(j.at("params").get<std::vector<double>>());
  return f;
}

nlohmann::json FlowModel::to_json() const {
  return {{"pair", {source, target}},
          {"standardization",
           {{"cond_mean", cond_mean}, {"cond_scale", cond_scale},
            {"target_mean", target_mean}, {"target_scale", target_scale}}},
          {"config",
           {{"hidden", config.hidden}, {"epochs", config.epochs}, {"batch", config.batch},
            {"step_size", config.step_size}, {"ode_steps", config.ode_steps}, {"seed", config.seed}}},
          {"field", field.to_json()},
          {"train_loss_trace", train_loss_trace}};
}

FlowModel FlowModel::from_json(const nlohmann::json& j) {
  FlowModel m;
  m.source = j.at("pair").at(0).get<std::size_t>();
  m.target = j.at("pair").at(1).get<std::size_t>();
  const auto& s = j.at("standardization");
  m.cond_mean = s.at("cond_mean");
  m.cond_scale = s.at("cond_scale");
  m.target_mean = s.at("target_mean");
  m.target_scale = s.at("target_scale");
  const auto& c = j.at("config");
  m.config.hidden = c.at("hidden");
  m.config.epochs = c.at("epochs");
  m.config.batch = c.at("batch");
  m.config.step_size = c.at("step_size");
  m.config.ode_steps = c.at("ode_steps");
  m.config.seed = c.at("seed");
  m.field = VelocityField::from_json(j.at("field"));
  m.train_loss_trace = j.at("train_loss_trace").get<std::vector<double>>();
  return m;
}

namespace {

struct Moments {
  double mean;
  double scale;
};

Moments moments(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(v.size() - 1, 1));
  const double sd = std::sqrt(var);
  return {mean, sd > 1e-12 ? sd : 1.0};
}

}  // namespace

FlowModel train_flow(const Dataset& data, std::size_t i, std::size_t j, const FlowConfig& config) {
  if (i >= data.d() || j >= data.d() || i == j) throw Error("invalid flow pair");
  if (data.n() < 50) throw Error("flow training needs n >= 50 rows, got " + std::to_string(data.n()));
  if (config.hidden == 0 || config.batch == 0 || config.epochs == 0 || config.ode_steps == 0) {
    throw Error("flow config sizes must be positive");
  }

  FlowModel model;
  model.source = i;
  model.target = j;
  model.config = config;
  const Eigen::VectorXd cond = data.values.col(static_cast<Eigen::Index>(i));
  const Eigen::VectorXd tgt = data.values.col(static_cast<Eigen::Index>(j));
  const Moments mc = moments(cond), mt = moments(tgt);
  model.cond_mean = mc.mean;
  model.cond_scale = mc.scale;
  model.target_mean = mt.mean;
  model.target_scale = mt.scale;

  const std::size_t n = data.n();
  std::vector<double> c_std(n), x_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    c_std[r] = (cond(static_cast<Eigen::Index>(r)) - mc.mean) / mc.scale;
    x_std[r] = (tgt(static_cast<Eigen::Index>(r)) - mt.mean) / mt.scale;
  }

  Rng rng = make_rng(config.seed, {fnv1a("flow"), i, j});
  model.field = VelocityField(config.hidden, rng);
  std::vector<double> theta = model.field.parameters();
  std::vector<double> m1(theta.size(), 0.0), m2(theta.size(), 0.0), grad;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> bc, bx;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch) {
      const std::size_t stop = std::min(n, start + config.batch);
      bc.clear();
      bx.clear();
      for (std::size_t r = start; r < stop; ++r) {
        bc.push_back(c_std[perm[r]]);
        bx.push_back(x_std[perm[r]]);
      }
      const FlowBatch batch = make_flow_batch(bc, bx, rng);
      const double loss = model.field.loss_and_gradient(batch, grad);
      if (!std::isfinite(loss)) {
        throw Error("flow training diverged (non-finite loss); reduce step_size");
      }
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < theta.size(); ++p) {
        m1[p] = config.beta1 * m1[p] + (1.0 - config.beta1) * grad[p];
        m2[p] = config.beta2 * m2[p] + (1.0 - config.beta2) * grad[p] * grad[p];
        theta[p] -= config.step_size * (m1[p] / c1) / (std::sqrt(m2[p] / c2) + config.adam_eps);
      }
      model.field.set_parameters(theta);
      epoch_loss += loss;
      ++batches;
    }
    model.train_loss_trace.push_back(epoch_loss / static_cast<double>(batches));
  }
  if (!std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); })) {
    throw Error("flow training produced non-finite parameters");
  }
  return model;
}

std::vector<double> sample_conditional(const FlowModel& model, double c, std::size_t n_samples,
                                       std::uint64_t seed) {
  if (n_samples == 0) return {};
  const std::size_t steps = std::max<std::size_t>(model.config.ode_steps, 1);
  Rng rng = make_rng(seed, {fnv1a("flow-sample"), model.source, model.target});
  std::normal_distribution<double> base(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(n_samples);
  Eigen::VectorXd x(n);
  for (Eigen::Index r = 0; r < n; ++r) x(r) = base(rng);
  const Eigen::VectorXd cond = Eigen::VectorXd::Constant(n, (c - model.cond_mean) / model.cond_scale);
  const double dt = 1.0 / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    x += dt * model.field.evaluate(x, static_cast<double>(s) * dt, cond);
  }
  if (!x.allFinite()) throw Error("flow sampling produced a non-finite trajectory");
  std::vector<double> out(n_samples);
  for (Eigen::Index r = 0; r < n; ++r) {
    out[static_cast<std::size_t>(r)] = model.target_mean + model.target_scale * x(r);
  }
  return out;
}

double cfm_loss(const FlowModel& model, const Dataset& data, std::uint64_t seed, std::size_t draws) {
  const std::size_t n = data.n();
  std::vector<double> c(n), x(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    c[r] = (data.values(rr, static_cast<Eigen::Index>(model.source)) - model.cond_mean) / model.cond_scale;
    x[r] = (data.values(rr, static_cast<Eigen::Index>(model.target)) - model.target_mean) / model.target_scale;
  }
  Rng rng = make_rng(seed, {fnv1a("cfm-loss")});
  double total = 0.0;
  for (std::size_t k = 0; k < draws; ++k) total += model.field.loss(make_flow_batch(c, x, rng));
  return total / static_cast<double>(draws);
}

double bimodality_coefficient(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  if (xs.size() < 4) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : xs) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 <= 0.0) return 0.0;
  // Bias-corrected sample skewness and excess kurtosis.
  const double g1 = m3 / std::pow(m2, 1.5);
  const double g2 = m4 / (m2 * m2) - 3.0;
  const double skew = g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
  const double kurt = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
  return (skew * skew + 1.0) / (kurt + 3.0 * (n - 1.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0)));
}

}  // namespace cfmsd
