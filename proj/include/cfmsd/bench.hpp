#pragma once
// Benchmark grid over (graph, mechanism, gamma, replicate), aggregation into
// F1 tables, and file-based discovery for external data.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iterator>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "cfmsd/discovery.hpp"
#include "cfmsd/graph.hpp"
#include "cfmsd/scm.hpp"
#include "json.hpp"

namespace cfmsd {

struct BenchConfig {
  std::vector<Topology> graphs{std::begin(kAllTopologies), std::end(kAllTopologies)};
  std::vector<Mechanism> mechanisms{Mechanism::Linear};
  std::vector<double> gammas{0.0, 0.2, 0.4, 0.6, 0.8};
  std::size_t seeds = 5;
  std::size_t n_obs = 500;
  std::size_t n_int = 200;  // per variable, split evenly over the K do-values
  std::size_t K = 4;
  double eps_sim = 0.0;
  std::uint64_t base_seed = 0;
  std::size_t workers = 1;
  DiscoveryConfig discovery;
  std::optional<std::filesystem::path> output;

  std::size_t m_per_value() const { return n_int / K; }
  std::size_t row_count() const { return graphs.size() * mechanisms.size() * gammas.size() * seeds; }

  void validate() const;
  nlohmann::json to_json() const;
  static BenchConfig from_json(const nlohmann::json& j);
};

struct ResultRow {
  Topology graph = Topology::Fork;
  Mechanism mechanism = Mechanism::Linear;
  double gamma = 0.0;
  std::size_t seed = 0;  // replicate index
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t shd = 0;
  double runtime_ms = 0.0;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

std::uint64_t row_seed(std::uint64_t base_seed, Topology graph, Mechanism mechanism, double gamma,
                       std::size_t replicate);

// One cell of the grid. Failures are caught and reported in ResultRow::error.
ResultRow run_cell(const BenchConfig& config, Topology graph, Mechanism mechanism, double gamma,
                   std::size_t replicate);

std::string results_csv_header();
std::string to_csv_line(const ResultRow& row);

// Append-only results file; every row is flushed as soon as it is written.
class ResultWriter {
 public:
  explicit ResultWriter(const std::filesystem::path& path);
  void append(const ResultRow& row);

 private:
  std::ofstream out_;
  std::mutex mutex_;
};

using RowCallback = std::function<void(const ResultRow&)>;

// Rows come back in grid order (graph, mechanism, gamma, replicate). When
// config.output is set rows are also appended to it as they finish;
// on_row is called under the same lock.
std::vector<ResultRow> run_grid(const BenchConfig& config, const RowCallback& on_row = {});

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

struct GroupStats {
  double mean_f1 = 0.0;
  std::size_t count = 0;
};

struct Summary {
  std::map<std::pair<Mechanism, Topology>, GroupStats> by_graph;
  std::map<std::tuple<Mechanism, Topology, double>, GroupStats> by_graph_gamma;
  std::map<Mechanism, GroupStats> by_mechanism;
  GroupStats overall;
  std::size_t errors = 0;

  std::string to_text(bool published_baselines = false) const;
  std::string to_csv() const;
};

// Means over successful rows. Values are summed in sorted order so the
// result does not depend on row order.
Summary aggregate(const std::vector<ResultRow>& rows);

struct PublishedBaseline {
  std::string method;
  double f1;
};

// Published F1 of the comparison methods, for display only.
std::vector<PublishedBaseline> published_linear_baselines(Topology graph);
std::vector<PublishedBaseline> published_linear_overall();
std::vector<PublishedBaseline> published_nonlinear_baselines(Mechanism mechanism);

DiscoveryResult discover_from_files(const std::filesystem::path& obs_csv, const std::filesystem::path& int_dir,
                                    const DiscoveryConfig& config = {});

}  // namespace cfmsd
