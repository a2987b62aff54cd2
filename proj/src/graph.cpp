#include "cfmsd/graph.hpp"

#include <algorithm>
#include <deque>

namespace cfmsd {

std::string to_string(const Edge& e) {
  return std::to_string(e.from) + "->" + std::to_string(e.to);
}

Adjacency Adjacency::from_edges(std::size_t d, std::span<const Edge> edges) {
  Adjacency g(d);
  for (const Edge& e : edges) {
    if (e.from >= d || e.to >= d) {
      throw Error("edge " + to_string(e) + " out of range for d=" + std::to_string(d));
    }
    g.set(e.from, e.to);
  }
  return g;
}

void Adjacency::set(std::size_t i, std::size_t j, bool on) {
  bits_[i * d_ + j] = on ? 1 : 0;
}

std::vector<Edge> Adjacency::edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < d_; ++i) {
    for (std::size_t j = 0; j < d_; ++j) {
      if (has(i, j)) out.push_back({i, j});
    }
  }
  return out;
}

std::size_t Adjacency::edge_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

namespace {

// Kahn's algorithm; returns fewer than d entries when a cycle exists.
std::vector<std::size_t> kahn(const Adjacency& g) {
  const std::size_t d = g.d();
  std::vector<std::size_t> indeg(d, 0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (g.has(i, j)) ++indeg[j];
  std::deque<std::size_t> ready;
  for (std::size_t j = 0; j < d; ++j)
    if (indeg[j] == 0) ready.push_back(j);
  std::vector<std::size_t> order;
  order.reserve(d);
  while (!ready.empty()) {
    const std::size_t u = ready.front();
    ready.pop_front();
    order.push_back(u);
    for (std::size_t v = 0; v < d; ++v) {
      if (g.has(u, v) && --indeg[v] == 0) ready.push_back(v);
    }
  }
  return order;
}

}  // namespace

bool is_acyclic(const Adjacency& g) { return kahn(g).size() == g.d(); }

std::optional<std::vector<Edge>> find_cycle(const Adjacency& g) {
  const std::size_t d = g.d();
  enum : unsigned char { kWhite, kGrey, kBlack };
  std::vector<unsigned char> colour(d, kWhite);
  std::vector<std::size_t> parent(d, d);

  // Iterative DFS; neighbours visited in increasing index order.
  for (std::size_t root = 0; root < d; ++root) {
    if (colour[root] != kWhite) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    colour[root] = kGrey;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next == d) {
        colour[u] = kBlack;
        stack.pop_back();
        continue;
      }
      const std::size_t v = next++;
      if (!g.has(u, v)) continue;
      if (colour[v] == kGrey) {
        std::vector<Edge> cycle{{u, v}};
        for (std::size_t w = u; w != v; w = parent[w]) cycle.push_back({parent[w], w});
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      if (colour[v] == kWhite) {
        colour[v] = kGrey;
        parent[v] = u;
        stack.emplace_back(v, 0);
      }
    }
  }
  return std::nullopt;
}

std::vector<std::size_t> topological_order(const Adjacency& g) {
  auto order = kahn(g);
  if (order.size() != g.d()) throw Error("graph contains a directed cycle");
  return order;
}

Dag::Dag(Adjacency adj) : adj_(std::move(adj)) {
  for (std::size_t i = 0; i < adj_.d(); ++i) {
    if (adj_.has(i, i)) throw Error("self-loop on variable " + std::to_string(i));
  }
  order_ = topological_order(adj_);
}

Dag Dag::from_edges(std::size_t d, std::span<const Edge> edges) {
  return Dag(Adjacency::from_edges(d, edges));
}

std::vector<std::size_t> Dag::parents(std::size_t j) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d(); ++i)
    if (adj_.has(i, j)) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dag::children(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < d(); ++j)
    if (adj_.has(i, j)) out.push_back(j);
  return out;
}

bool Dag::reaches(std::size_t from, std::size_t to) const {
  if (from == to) return false;
  std::vector<unsigned char> seen(d(), 0);
  std::vector<std::size_t> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < d(); ++v) {
      if (!adj_.has(u, v) || seen[v]) continue;
      if (v == to) return true;
      seen[v] = 1;
      stack.push_back(v);
    }
  }
  return false;
}

std::string_view topology_name(Topology t) {
  switch (t) {
    case Topology::Fork: return "fork";
    case Topology::Chain: return "chain";
    case Topology::VStructure: return "vstr";
    case Topology::Diamond: return "diamond";
    case Topology::Collider: return "collider";
  }
  return "?";
}

Topology parse_topology(std::string_view name) {
  for (Topology t : kAllTopologies) {
    if (topology_name(t) == name) return t;
  }
  if (name == "v-structure" || name == "vstructure") return Topology::VStructure;
  throw Error("unknown topology '" + std::string(name) + "'");
}

Dag canonical_topology(Topology kind, std::size_t d) {
  if (d != 5) throw Error("canonical topologies are defined for d=5 only, got d=" + std::to_string(d));
  std::vector<Edge> edges;
  switch (kind) {
    case Topology::Fork: edges = {{0, 1}, {0, 2}, {0, 3}, {0, 4}}; break;
    case Topology::Chain: edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}}; break;
    case Topology::VStructure: edges = {{0, 2}, {1, 2}, {3, 4}}; break;
    case Topology::Diamond: edges = {{0, 1}, {0, 2}, {1, 3}, {2, 3}}; break;
    case Topology::Collider: edges = {{0, 4}, {1, 4}, {2, 4}, {3, 4}}; break;
    default: throw Error("unknown topology kind");
  }
  return Dag::from_edges(d, edges);
}

EdgeMetrics edge_metrics(const Dag& truth, const Adjacency& estimate) {
  const std::size_t d = truth.d();
  if (estimate.d() != d) {
    throw Error("dimension mismatch: truth d=" + std::to_string(d) +
                ", estimate d=" + std::to_string(estimate.d()));
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      const bool t = truth.has_edge(i, j);
      const bool e = estimate.has(i, j);
      tp += (t && e);
      fp += (!t && e);
      fn += (t && !e);
    }
  }
  EdgeMetrics m;
  m.shd = fp + fn;
  const std::size_t n_true = tp + fn;
  const std::size_t n_est = tp + fp;
  if (n_true == 0 && n_est == 0) {
    m.precision = m.recall = m.f1 = 1.0;
    return m;
  }
  m.precision = n_est ? static_cast<double>(tp) / n_est : 0.0;
  m.recall = n_true ? static_cast<double>(tp) / n_true : 0.0;
  const double denom = m.precision + m.recall;
  m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  return m;
}

nlohmann::json to_json(const Adjacency& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.from, e.to});
  return {{"d", g.d()}, {"edges", edges}};
}

Adjacency adjacency_from_json(const nlohmann::json& j) {
  const auto d = j.at("d").get<std::size_t>();
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw Error("edge entries must be [from, to] pairs");
    edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
  }
  return Adjacency::from_edges(d, edges);
}

}  // namespace cfmsd
