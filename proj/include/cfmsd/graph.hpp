#pragma once
// Directed graphs over observed variables, the canonical benchmark
// topologies, and directed-edge accuracy metrics.

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cfmsd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;

  auto operator<=>(const Edge&) const = default;
};

std::string to_string(const Edge& e);

// Square boolean matrix; entry (i, j) means i -> j. May contain cycles.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(std::size_t d) : d_(d), bits_(d * d, 0) {}

  static Adjacency from_edges(std::size_t d, std::span<const Edge> edges);

  std::size_t d() const { return d_; }
  bool has(std::size_t i, std::size_t j) const { return bits_[i * d_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool on = true);

  std::vector<Edge> edges() const;  // row-major (lexicographic) order
  std::size_t edge_count() const;

  bool operator==(const Adjacency&) const = default;

 private:
  std::size_t d_ = 0;
  std::vector<unsigned char> bits_;
};

bool is_acyclic(const Adjacency& g);

// Some directed cycle as a closed list of edges, or nullopt.
std::optional<std::vector<Edge>> find_cycle(const Adjacency& g);

// Topological order; throws if g has a cycle.
std::vector<std::size_t> topological_order(const Adjacency& g);

// Acyclic, loop-free adjacency.
class Dag {
 public:
  explicit Dag(std::size_t d = 0) : Dag(Adjacency(d)) {}
  explicit Dag(Adjacency adj);
  static Dag from_edges(std::size_t d, std::span<const Edge> edges);

  std::size_t d() const { return adj_.d(); }
  bool has_edge(std::size_t i, std::size_t j) const { return adj_.has(i, j); }
  const Adjacency& adjacency() const { return adj_; }
  std::vector<Edge> edges() const { return adj_.edges(); }
  std::size_t edge_count() const { return adj_.edge_count(); }
  const std::vector<std::size_t>& order() const { return order_; }

  std::vector<std::size_t> parents(std::size_t j) const;
  std::vector<std::size_t> children(std::size_t i) const;
  // True when a directed path from `from` to `to` exists (from != to).
  bool reaches(std::size_t from, std::size_t to) const;

  bool operator==(const Dag& o) const { return adj_ == o.adj_; }

 private:
  Adjacency adj_;
  std::vector<std::size_t> order_;
};

enum class Topology { Fork, Chain, VStructure, Diamond, Collider };

inline constexpr Topology kAllTopologies[] = {Topology::Fork, Topology::Chain, Topology::VStructure,
                                              Topology::Diamond, Topology::Collider};

std::string_view topology_name(Topology t);  // "fork", "chain", "vstr", "diamond", "collider"
Topology parse_topology(std::string_view name);

Dag canonical_topology(Topology kind, std::size_t d = 5);

struct EdgeMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t shd = 0;
};

EdgeMetrics edge_metrics(const Dag& truth, const Adjacency& estimate);

// {"d": 5, "edges": [[0,1], ...]}
nlohmann::json to_json(const Adjacency& g);
Adjacency adjacency_from_json(const nlohmann::json& j);

}  // namespace cfmsd
