#include "cfmsd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "cfmsd/io.hpp"
#include "cfmsd/rng.hpp"

namespace cfmsd {

void BenchConfig::validate() const {
  if (graphs.empty()) throw Error("bench config: no graphs");
  if (mechanisms.empty()) throw Error("bench config: no mechanisms");
  if (gammas.empty()) throw Error("bench config: no gammas");
  for (double g : gammas)
    if (!(g >= 0.0) || !std::isfinite(g)) throw Error("bench config: gammas must be finite and >= 0");
  if (seeds == 0 || n_obs == 0 || n_int == 0 || K == 0 || workers == 0) {
    throw Error("bench config: seeds, n_obs, n_int, K and workers must be positive");
  }
  if (K < 2) throw Error("bench config: K must be at least 2");
  if (m_per_value() == 0) throw Error("bench config: n_int must be at least K");
  if (!(eps_sim >= 0.0)) throw Error("bench config: eps_sim must be >= 0");
  discovery.validate();
}

nlohmann::json BenchConfig::to_json() const {
  nlohmann::json j;
  j["graphs"] = nlohmann::json::array();
  for (Topology t : graphs) j["graphs"].push_back(std::string(topology_name(t)));
  j["mechanisms"] = nlohmann::json::array();
  for (Mechanism m : mechanisms) j["mechanisms"].push_back(std::string(mechanism_name(m)));
  j["gammas"] = gammas;
  j["seeds"] = seeds;
  j["n_obs"] = n_obs;
  j["n_int"] = n_int;
  j["K"] = K;
  j["eps_sim"] = eps_sim;
  j["base_seed"] = base_seed;
  j["workers"] = workers;
  j["discovery"] = discovery.to_json();
  if (output) j["output"] = output->string();
  return j;
}

BenchConfig BenchConfig::from_json(const nlohmann::json& j) {
  BenchConfig c;
  if (j.contains("graphs")) {
    c.graphs.clear();
    for (const auto& g : j.at("graphs")) c.graphs.push_back(parse_topology(g.get<std::string>()));
  }
  if (j.contains("mechanisms")) {
    c.mechanisms.clear();
    for (const auto& m : j.at("mechanisms")) c.mechanisms.push_back(parse_mechanism(m.get<std::string>()));
  }
  if (j.contains("gammas")) c.gammas = j.at("gammas").get<std::vector<double>>();
  if (j.contains("seeds")) c.seeds = j.at("seeds");
  if (j.contains("n_obs")) c.n_obs = j.at("n_obs");
  if (j.contains("n_int")) c.n_int = j.at("n_int");
  if (j.contains("K")) c.K = j.at("K");
  if (j.contains("eps_sim")) c.eps_sim = j.at("eps_sim");
  if (j.contains("base_seed")) c.base_seed = j.at("base_seed");
  if (j.contains("workers")) c.workers = j.at("workers");
  if (j.contains("discovery")) c.discovery = DiscoveryConfig::from_json(j.at("discovery"));
  if (j.contains("output")) c.output = j.at("output").get<std::string>();
  c.validate();
  return c;
}

std::uint64_t row_seed(std::uint64_t base_seed, Topology graph, Mechanism mechanism, double gamma,
                       std::size_t replicate) {
  return mix_seed(base_seed, {fnv1a(topology_name(graph)), fnv1a(mechanism_name(mechanism)),
                              std::bit_cast<std::uint64_t>(gamma + 0.0), static_cast<std::uint64_t>(replicate)});
}

ResultRow run_cell(const BenchConfig& config, Topology graph, Mechanism mechanism, double gamma,
                   std::size_t replicate) {
  ResultRow row;
  row.graph = graph;
  row.mechanism = mechanism;
  row.gamma = gamma;
  row.seed = replicate;
  const auto start = std::chrono::steady_clock::now();
  try {
    const std::uint64_t seed = row_seed(config.base_seed, graph, mechanism, gamma, replicate);
    ScmSpec spec;
    spec.graph = canonical_topology(graph);
    spec.weights = random_weights(spec.graph, seed);
    spec.mechanism = mechanism;
    spec.gamma = gamma;
    spec.seed = seed;
    spec.validate();

    const Dataset obs = sample_observational(spec, config.n_obs);
    const auto sim = noisy_simulator(spec, config.eps_sim);
    const auto ints = acquire_interventions(*sim, obs, config.K, config.m_per_value());
    const DiscoveryResult res = discover(obs, ints, config.discovery);
    const EdgeMetrics m = edge_metrics(spec.graph, res.graph.adjacency());
    row.f1 = m.f1;
    row.precision = m.precision;
    row.recall = m.recall;
    row.shd = m.shd;
  } catch (const std::exception& e) {
    row.error = e.what();
    if (row.error.empty()) row.error = "unknown error";
  }
  row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::string results_csv_header() { return "graph,mechanism,gamma,seed,f1,precision,recall,shd,runtime_ms"; }

std::string to_csv_line(const ResultRow& row) {
  std::ostringstream s;
  s << topology_name(row.graph) << ',' << mechanism_name(row.mechanism) << ',' << format_double(row.gamma) << ','
    << row.seed << ',';
  if (row.ok()) {
    s << format_double(row.f1) << ',' << format_double(row.precision) << ',' << format_double(row.recall) << ','
      << row.shd << ',';
    s << std::fixed << std::setprecision(3) << row.runtime_ms;
  } else {
    // Metrics are left as NA and the message goes in the last column.
    std::string msg = row.error;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    s << "NA,NA,NA,NA,error: " << msg;
  }
  return s.str();
}

ResultWriter::ResultWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw Error("cannot write " + path.string());
  out_ << results_csv_header() << '\n' << std::flush;
}

void ResultWriter::append(const ResultRow& row) {
  std::lock_guard lock(mutex_);
  out_ << to_csv_line(row) << '\n' << std::flush;
}

std::vector<ResultRow> run_grid(const BenchConfig& config, const RowCallback& on_row) {
  config.validate();
  struct Cell {
    Topology graph;
    Mechanism mechanism;
    double gamma;
    std::size_t replicate;
  };
  std::vector<Cell> cells;
  cells.reserve(config.row_count());
  for (Topology g : config.graphs)
    for (Mechanism m : config.mechanisms)
      for (double gamma : config.gammas)
        for (std::size_t r = 0; r < config.seeds; ++r) cells.push_back({g, m, gamma, r});

  std::optional<ResultWriter> writer;
  if (config.output) writer.emplace(*config.output);

  std::vector<ResultRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex sink_mutex;
  auto work = [&] {
    for (std::size_t idx = next++; idx < cells.size(); idx = next++) {
      const Cell& c = cells[idx];
      rows[idx] = run_cell(config, c.graph, c.mechanism, c.gamma, c.replicate);
      std::lock_guard lock(sink_mutex);
      if (writer) writer->append(rows[idx]);
      if (on_row) on_row(rows[idx]);
    }
  };
  const std::size_t n_workers = std::min(config.workers, cells.size());
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
  }
  return rows;
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != results_csv_header()) {
    throw Error(path.string() + ": unexpected results header");
  }
  auto number = [&](const std::string& cell, std::size_t line_no) {
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": bad number '" + cell + "'");
    }
    return v;
  };
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw Error(path.string() + ": line " + std::to_string(line_no) + ": expected 9 cells");
    ResultRow r;
    r.graph = parse_topology(cells[0]);
    r.mechanism = parse_mechanism(cells[1]);
    r.gamma = number(cells[2], line_no);
    r.seed = static_cast<std::size_t>(number(cells[3], line_no));
    if (cells[4] == "NA") {
      r.error = cells[8].rfind("error: ", 0) == 0 ? cells[8].substr(7) : cells[8];
    } else {
      r.f1 = number(cells[4], line_no);
      r.precision = number(cells[5], line_no);
      r.recall = number(cells[6], line_no);
      r.shd = static_cast<std::size_t>(number(cells[7], line_no));
      r.runtime_ms = number(cells[8], line_no);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

GroupStats stats_of(std::vector<double> values) {
  GroupStats g;
  g.count = values.size();
  if (values.empty()) return g;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  g.mean_f1 = sum / static_cast<double>(values.size());
  return g;
}

std::string fixed3(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

Summary aggregate(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw Error("aggregate: no rows");
  std::map<std::pair<Mechanism, Topology>, std::vector<double>> by_graph;
  std::map<std::tuple<Mechanism, Topology, double>, std::vector<double>> by_graph_gamma;
  std::map<Mechanism, std::vector<double>> by_mech;
  std::vector<double> all;
  Summary s;
  for (const ResultRow& r : rows) {
    if (!r.ok()) {
      ++s.errors;
      continue;
    }
    by_graph[{r.mechanism, r.graph}].push_back(r.f1);
    by_graph_gamma[{r.mechanism, r.graph, r.gamma}].push_back(r.f1);
    by_mech[r.mechanism].push_back(r.f1);
    all.push_back(r.f1);
  }
  for (auto& [k, v] : by_graph) s.by_graph[k] = stats_of(std::move(v));
  for (auto& [k, v] : by_graph_gamma) s.by_graph_gamma[k] = stats_of(std::move(v));
  for (auto& [k, v] : by_mech) s.by_mechanism[k] = stats_of(std::move(v));
  s.overall = stats_of(std::move(all));
  return s;
}

std::string Summary::to_text(bool published_baselines) const {
  std::ostringstream out;
  std::vector<Mechanism> mechs;
  std::vector<double> gammas;
  for (const auto& [k, _] : by_mechanism) mechs.push_back(k);
  for (const auto& [k, _] : by_graph_gamma)
    if (std::find(gammas.begin(), gammas.end(), std::get<2>(k)) == gammas.end()) gammas.push_back(std::get<2>(k));
  std::sort(gammas.begin(), gammas.end());

  for (Mechanism m : mechs) {
    out << "mechanism " << mechanism_name(m) << "\n";
    out << pad("graph", 10);
    for (double g : gammas) out << lpad("g=" + fixed3(g).substr(0, 3), 8);
    out << lpad("mean", 8);
    const bool linear_baselines = published_baselines && m == Mechanism::Linear;
    if (linear_baselines) {
      out << "   |";
      for (const auto& b : published_linear_overall()) out << lpad(b.method, 9);
    }
    out << "\n";
    for (const auto& [key, gs] : by_graph) {
      if (key.first != m) continue;
      out << pad(std::string(topology_name(key.second)), 10);
      for (double g : gammas) {
        const auto it = by_graph_gamma.find({m, key.second, g});
        out << lpad(it == by_graph_gamma.end() ? "-" : fixed3(it->second.mean_f1), 8);
      }
      out << lpad(fixed3(gs.mean_f1), 8);
      if (linear_baselines) {
        out << "   |";
        for (const auto& b : published_linear_baselines(key.second)) out << lpad(fixed3(b.f1), 9);
      }
      out << "\n";
    }
    out << pad("overall", 10) << std::string(8 * gammas.size(), ' ') << lpad(fixed3(by_mechanism.at(m).mean_f1), 8);
    if (linear_baselines) {
      out << "   |";
      for (const auto& b : published_linear_overall()) out << lpad(fixed3(b.f1), 9);
    }
    out << "\n";
    if (published_baselines && m != Mechanism::Linear) {
      out << "published:";
      for (const auto& b : published_nonlinear_baselines(m)) out << ' ' << b.method << '=' << fixed3(b.f1);
      out << "\n";
    }
    out << "\n";
  }
  if (published_baselines && std::find(mechs.begin(), mechs.end(), Mechanism::Linear) != mechs.end()) {
    out << "columns right of '|' are published numbers, not recomputed\n";
  }
  out << "overall mean F1 " << fixed3(overall.mean_f1) << " over " << overall.count << " rows";
  if (errors) out << " (" << errors << " failed rows excluded)";
  out << "\n";
  return out.str();
}

std::string Summary::to_csv() const {
  std::ostringstream out;
  out << "mechanism,graph,gamma,mean_f1,count\n";
  for (const auto& [k, g] : by_graph_gamma) {
    out << mechanism_name(std::get<0>(k)) << ',' << topology_name(std::get<1>(k)) << ','
        << format_double(std::get<2>(k)) << ',' << format_double(g.mean_f1) << ',' << g.count << '\n';
  }
  for (const auto& [k, g] : by_graph) {
    out << mechanism_name(k.first) << ',' << topology_name(k.second) << ",all," << format_double(g.mean_f1) << ','
        << g.count << '\n';
  }
  for (const auto& [k, g] : by_mechanism) {
    out << mechanism_name(k) << ",all,all," << format_double(g.mean_f1) << ',' << g.count << '\n';
  }
  out << "all,all,all," << format_double(overall.mean_f1) << ',' << overall.count << '\n';
  return out.str();
}

std::vector<PublishedBaseline> published_linear_baselines(Topology graph) {
  static const std::vector<std::string> methods{"PC", "GES", "FCI", "LiNGAM", "IGSP", "UT-IGSP", "CFM-SD"};
  std::vector<double> f1;
  switch (graph) {
    case Topology::Fork: f1 = {0.240, 0.209, 0.036, 0.297, 0.472, 0.448, 0.726}; break;
    case Topology::Chain: f1 = {0.195, 0.159, 0.081, 0.405, 0.605, 0.549, 0.840}; break;
    case Topology::VStructure: f1 = {0.166, 0.106, 0.126, 0.333, 0.618, 0.566, 0.829}; break;
    case Topology::Diamond: f1 = {0.287, 0.291, 0.259, 0.379, 0.635, 0.567, 0.734}; break;
    case Topology::Collider: f1 = {0.174, 0.244, 0.133, 0.352, 0.480, 0.487, 0.871}; break;
  }
  std::vector<PublishedBaseline> out;
  for (std::size_t k = 0; k < methods.size(); ++k) out.push_back({methods[k], f1[k]});
  return out;
}

std::vector<PublishedBaseline> published_linear_overall() {
  return {{"PC", 0.212},     {"GES", 0.202},      {"FCI", 0.127},   {"LiNGAM", 0.353},
          {"IGSP", 0.562},   {"UT-IGSP", 0.523},  {"CFM-SD", 0.800}};
}

std::vector<PublishedBaseline> published_nonlinear_baselines(Mechanism mechanism) {
  static const std::vector<std::string> methods{"PC",      "GES",      "FCI",          "LiNGAM",       "IGSP_obs",
                                                "IGSP_int", "UT-IGSP_obs", "UT-IGSP_int", "CFM-SD"};
  std::vector<double> f1;
  switch (mechanism) {
    case Mechanism::Linear: return {};
    case Mechanism::NL1: f1 = {0.170, 0.193, 0.058, 0.117, 0.351, 0.525, 0.348, 0.495, 0.675}; break;
    case Mechanism::NL2: f1 = {0.186, 0.150, 0.069, 0.331, 0.425, 0.626, 0.432, 0.606, 0.630}; break;
    case Mechanism::NL3: f1 = {0.152, 0.186, 0.063, 0.243, 0.369, 0.531, 0.363, 0.490, 0.695}; break;
    case Mechanism::NL4: f1 = {0.210, 0.185, 0.086, 0.141, 0.314, 0.496, 0.338, 0.475, 0.692}; break;
  }
  std::vector<PublishedBaseline> out;
  for (std::size_t k = 0; k < methods.size(); ++k) out.push_back({methods[k], f1[k]});
  return out;
}

DiscoveryResult discover_from_files(const std::filesystem::path& obs_csv, const std::filesystem::path& int_dir,
                                    const DiscoveryConfig& config) {
  const Dataset obs = read_dataset_csv(obs_csv);
  const auto ints = read_intervention_dir(int_dir, obs.d());
  return discover(obs, ints, config);
}

}  // namespace cfmsd
