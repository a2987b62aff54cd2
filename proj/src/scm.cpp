#include "cfmsd/scm.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cfmsd/rng.hpp"

namespace cfmsd {

std::string_view mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::Linear: return "linear";
    case Mechanism::NL1: return "nl1";
    case Mechanism::NL2: return "nl2";
    case Mechanism::NL3: return "nl3";
    case Mechanism::NL4: return "nl4";
  }
  return "?";
}

Mechanism parse_mechanism(std::string_view name) {
  for (Mechanism m : {Mechanism::Linear, Mechanism::NL1, Mechanism::NL2, Mechanism::NL3, Mechanism::NL4}) {
    if (mechanism_name(m) == name) return m;
  }
  throw Error("unknown mechanism '" + std::string(name) + "'");
}

double mechanism_term(Mechanism m, double a, double x) {
  switch (m) {
    case Mechanism::Linear: return a * x;
    case Mechanism::NL1: return a * x + 0.5 * x * x;
    case Mechanism::NL2: return a * x + 0.5 * std::sin(std::numbers::pi * x);
    case Mechanism::NL3: return std::tanh(a * x);
    case Mechanism::NL4: return a * x + 0.5 * std::abs(x);
  }
  return 0.0;
}

void ScmSpec::validate() const {
  const auto dd = static_cast<Eigen::Index>(d());
  if (weights.rows() != dd || weights.cols() != dd) {
    throw Error("weight matrix must be " + std::to_string(d()) + "x" + std::to_string(d()));
  }
  for (std::size_t i = 0; i < d(); ++i) {
    for (std::size_t j = 0; j < d(); ++j) {
      const double w = weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (!std::isfinite(w)) throw Error("non-finite edge weight");
      if ((w != 0.0) != graph.has_edge(i, j)) {
        throw Error("weight support differs from graph at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error("gamma must be finite and >= 0");
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) throw Error("noise_std must be finite and > 0");
}

Eigen::MatrixXd random_weights(const Dag& graph, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(graph.d());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
  Rng rng = make_rng(seed, {fnv1a("weights")});
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  std::bernoulli_distribution negative(0.5);
  for (const Edge& e : graph.edges()) {
    const double a = magnitude(rng);
    w(static_cast<Eigen::Index>(e.from), static_cast<Eigen::Index>(e.to)) = negative(rng) ? -a : a;
  }
  return w;
}

std::size_t InterventionSet::block_offset(std::size_t k) const {
  std::size_t off = 0;
  for (std::size_t q = 0; q < k; ++q) off += per_value_counts[q];
  return off;
}

Eigen::Block<const Eigen::MatrixXd> InterventionSet::block(std::size_t k) const {
  return values.middleRows(static_cast<Eigen::Index>(block_offset(k)),
                           static_cast<Eigen::Index>(per_value_counts.at(k)));
}

void InterventionSet::validate() const {
  if (do_values.size() < 2) {
    throw Error("intervention on variable " + std::to_string(target) +
                " needs K >= 2 distinct do-values; a single fixed-value intervention cannot reveal causal influence");
  }
  if (per_value_counts.size() != do_values.size()) throw Error("per_value_counts must match do_values");
  if (target >= d()) throw Error("intervention target out of range");
  std::size_t total = 0;
  for (std::size_t c : per_value_counts) total += c;
  if (total != m()) throw Error("per_value_counts do not sum to the row count");
  for (std::size_t k = 0; k < do_values.size(); ++k) {
    const auto col = block(k).col(static_cast<Eigen::Index>(target));
    if ((col.array() != do_values[k]).any()) {
      throw Error("target column of intervention set " + std::to_string(target) + " deviates from its do-value");
    }
  }
  if (!values.allFinite()) throw Error("non-finite interventional sample");
}

namespace {

constexpr std::size_t kNoTarget = static_cast<std::size_t>(-1);

// Draws one row into `row`. Z and all eps_j are drawn every row, in a fixed
// order, so streams stay aligned regardless of the target.
void draw_row(const ScmSpec& spec, Rng& rng, std::size_t target, double do_value,
              Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, double& z_out) {
  std::normal_distribution<double> std_normal(0.0, 1.0);
  const std::size_t d = spec.d();
  const double z = std_normal(rng);
  thread_local std::vector<double> eps;
  eps.resize(d);
  for (std::size_t j = 0; j < d; ++j) eps[j] = spec.noise_std * std_normal(rng);

  for (std::size_t j : spec.graph.order()) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (j == target) {
      row(jj) = do_value;
      continue;
    }
    double v = spec.gamma * z + eps[j];
    for (std::size_t i : spec.graph.parents(j)) {
      const auto ii = static_cast<Eigen::Index>(i);
      v += mechanism_term(spec.mechanism, spec.weights(ii, jj), row(ii));
    }
    row(jj) = v;
  }
  z_out = z;
}

}  // namespace

Dataset sample_observational(const ScmSpec& spec, std::size_t n, LatentTrace* trace) {
  spec.validate();
  if (n == 0) throw Error("sample size must be positive");
  Dataset out{Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.d()))};
  Rng rng = make_rng(spec.seed, {fnv1a("observational")});
  if (trace) trace->z.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double z = 0.0;
    draw_row(spec, rng, kNoTarget, 0.0, out.values.row(static_cast<Eigen::Index>(r)), z);
    if (trace) trace->z[r] = z;
  }
  return out;
}

InterventionSet intervene(const ScmSpec& spec, std::size_t target, std::span<const double> do_values,
                          std::size_t m_per_value, LatentTrace* trace) {
  spec.validate();
  if (target >= spec.d()) throw Error("intervention target " + std::to_string(target) + " out of range");
  if (do_values.size() < 2) {
    throw Error("K >= 2 do-values required: a single fixed-value intervention cannot reveal causal influence");
  }
  if (m_per_value == 0) throw Error("m_per_value must be positive");

  InterventionSet set;
  set.target = target;
  set.do_values.assign(do_values.begin(), do_values.end());
  set.per_value_counts.assign(do_values.size(), m_per_value);
  const std::size_t m = m_per_value * do_values.size();
  set.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(spec.d()));
  if (trace) trace->z.assign(m, 0.0);

  Rng rng = make_rng(spec.seed, {fnv1a("interventional"), target});
  std::size_t r = 0;
  for (double x : do_values) {
    for (std::size_t q = 0; q < m_per_value; ++q, ++r) {
      double z = 0.0;
      draw_row(spec, rng, target, x, set.values.row(static_cast<Eigen::Index>(r)), z);
      if (trace) trace->z[r] = z;
    }
  }
  return set;
}

ScmSimulator::ScmSimulator(ScmSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

InterventionSet ScmSimulator::intervene(std::size_t target, std::span<const double> do_values,
                                        std::size_t m_per_value) const {
  return cfmsd::intervene(spec_, target, do_values, m_per_value);
}

NoisySimulator::NoisySimulator(ScmSpec spec, double eps_sim) : spec_(std::move(spec)), eps_sim_(eps_sim) {
  spec_.validate();
  if (!(eps_sim >= 0.0) || !std::isfinite(eps_sim)) throw Error("eps_sim must be finite and >= 0");
}

InterventionSet NoisySimulator::intervene(std::size_t target, std::span<const double> do_values,
                                          std::size_t m_per_value) const {
  InterventionSet set = cfmsd::intervene(spec_, target, do_values, m_per_value);
  if (eps_sim_ == 0.0) return set;
  Rng rng = make_rng(spec_.seed, {fnv1a("simulator-error"), target});
  std::normal_distribution<double> err(0.0, eps_sim_);
  for (Eigen::Index r = 0; r < set.values.rows(); ++r) {
    for (Eigen::Index j = 0; j < set.values.cols(); ++j) {
      if (static_cast<std::size_t>(j) == target) continue;
      set.values(r, j) += err(rng);
    }
  }
  return set;
}

std::unique_ptr<Simulator> noisy_simulator(const ScmSpec& spec, double eps_sim) {
  return std::make_unique<NoisySimulator>(spec, eps_sim);
}

}  // namespace cfmsd
