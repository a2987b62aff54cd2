#pragma once
// Synthetic structural causal model with one shared latent confounder Z.
// Each row draws Z ~ N(0, 1) and eps_j ~ N(0, noise_std^2), then evaluates
//   X_j = sum_{i in Pa(j)} f(A_ij, X_i) + gamma * Z + eps_j
// in topological order. The model doubles as the simulator: a hard
// intervention fixes X_i and cuts both its parents and its Z input.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cfmsd/graph.hpp"

namespace cfmsd {

enum class Mechanism { Linear, NL1, NL2, NL3, NL4 };

inline constexpr Mechanism kNonlinearMechanisms[] = {Mechanism::NL1, Mechanism::NL2, Mechanism::NL3,
                                                     Mechanism::NL4};

std::string_view mechanism_name(Mechanism m);  // "linear", "nl1", ...
Mechanism parse_mechanism(std::string_view name);

// Contribution of one parent value x through edge weight a.
double mechanism_term(Mechanism m, double a, double x);

struct ScmSpec {
  Dag graph;
  Eigen::MatrixXd weights;  // d x d, nonzero exactly on graph edges
  Mechanism mechanism = Mechanism::Linear;
  double gamma = 0.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  std::size_t d() const { return graph.d(); }
  // Throws Error when the weight support or scalar parameters are invalid.
  void validate() const;
};

// |A_ij| ~ U[0.5, 1.5] with a random sign on every edge; zero elsewhere.
Eigen::MatrixXd random_weights(const Dag& graph, std::uint64_t seed);

struct Dataset {
  Eigen::MatrixXd values;  // n x d

  std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(values.cols()); }
};

// Samples of P(X | do(X_target = x)) for K distinct do-values. Rows are
// stored in contiguous blocks, one block per do-value, in do_values order.
struct InterventionSet {
  std::size_t target = 0;
  std::vector<double> do_values;
  std::vector<std::size_t> per_value_counts;
  Eigen::MatrixXd values;  // m x d

  std::size_t m() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t block_offset(std::size_t k) const;
  // Rows recorded under do_values[k].
  Eigen::Block<const Eigen::MatrixXd> block(std::size_t k) const;
  // Throws Error on shape, count or target-column inconsistencies.
  void validate() const;
};

// Sink for the latent draws. Only tests look at Z.
struct LatentTrace {
  std::vector<double> z;
};

Dataset sample_observational(const ScmSpec& spec, std::size_t n, LatentTrace* trace = nullptr);

InterventionSet intervene(const ScmSpec& spec, std::size_t target, std::span<const double> do_values,
                          std::size_t m_per_value, LatentTrace* trace = nullptr);

// Source of interventional samples. The pipeline only ever talks to this.
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual std::size_t d() const = 0;
  virtual InterventionSet intervene(std::size_t target, std::span<const double> do_values,
                                    std::size_t m_per_value) const = 0;
};

class ScmSimulator : public Simulator {
 public:
  explicit ScmSimulator(ScmSpec spec);
  std::size_t d() const override { return spec_.d(); }
  InterventionSet intervene(std::size_t target, std::span<const double> do_values,
                            std::size_t m_per_value) const override;
  const ScmSpec& spec() const { return spec_; }

 private:
  ScmSpec spec_;
};

// Exact simulator plus independent N(0, eps_sim^2) error on every non-target
// column. The error stream is separate, so eps_sim = 0 reproduces intervene().
class NoisySimulator : public Simulator {
 public:
  NoisySimulator(ScmSpec spec, double eps_sim);
  std::size_t d() const override { return spec_.d(); }
  InterventionSet intervene(std::size_t target, std::span<const double> do_values,
                            std::size_t m_per_value) const override;
  double eps_sim() const { return eps_sim_; }

 private:
  ScmSpec spec_;
  double eps_sim_;
};

std::unique_ptr<Simulator> noisy_simulator(const ScmSpec& spec, double eps_sim);

}  // namespace cfmsd
