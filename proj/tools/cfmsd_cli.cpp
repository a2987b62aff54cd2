// cfmsd command line: benchmark grid, discovery on CSV data, SEI regression,
// diagnostics, and a synthetic data generator.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cfmsd/bench.hpp"
#include "cfmsd/io.hpp"
#include "cfmsd/rng.hpp"
#include "cfmsd/sei.hpp"
#include "json.hpp"

using namespace cfmsd;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return nlohmann::json::parse(in);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

// Options shared by every subcommand that runs discovery.
struct DiscoveryFlags {
  std::string config_path;
  std::string preset;
  std::string obs_conditional;
  std::string mmd_agg;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "JSON discovery config");
    app->add_option("--preset", preset, "threshold preset: default | obs-std");
    app->add_option("--obs-conditional", obs_conditional, "observational conditional for MMD: kde | flow");
    app->add_option("--mmd-agg", mmd_agg, "aggregation of MMD over do-values: mean | max");
  }

  DiscoveryConfig apply(DiscoveryConfig c) const {
    if (!config_path.empty()) {
      nlohmann::json j = read_json(config_path);
      if (j.contains("discovery")) j = j.at("discovery");
      c = DiscoveryConfig::from_json(j);
    }
    if (!preset.empty()) {
      c = DiscoveryConfig::from_json(nlohmann::json{{"preset", preset}});
    }
    nlohmann::json overrides = nlohmann::json::object();
    if (!obs_conditional.empty()) overrides["obs_conditional"] = obs_conditional;
    if (!mmd_agg.empty()) overrides["mmd_agg"] = mmd_agg;
    if (!overrides.empty()) {
      nlohmann::json j = c.to_json();
      j.update(overrides);
      c = DiscoveryConfig::from_json(j);
    }
    if (c.obs_conditional == ObsConditional::Flow) c.train_flows = true;
    c.validate();
    return c;
  }
};

std::vector<Mechanism> parse_mechanisms(const std::string& s) {
  std::vector<Mechanism> out;
  for (const auto& name : split_list(s)) {
    if (name == "nonlinear") {
      out.insert(out.end(), {Mechanism::NL1, Mechanism::NL2, Mechanism::NL3, Mechanism::NL4});
    } else {
      out.push_back(parse_mechanism(name));
    }
  }
  return out;
}

nlohmann::json multimodality_report(const DiscoveryResult& res, const Dataset& obs, std::uint64_t seed) {
  // Sarle's coefficient above 5/9 suggests more than one mode.
  constexpr double kUniformBc = 5.0 / 9.0;
  nlohmann::json out = nlohmann::json::array();
  for (const FlowModel& f : res.flows) {
    const auto do_values = percentile_do_values(obs, f.source, 4);
    nlohmann::json entry{{"source", f.source}, {"target", f.target}};
    double worst = 0.0;
    nlohmann::json per_value = nlohmann::json::array();
    for (double x : do_values) {
      const auto samples = sample_conditional(f, x, 1000, mix_seed(seed, {f.source, f.target}));
      const double bc = bimodality_coefficient(samples);
      worst = std::max(worst, bc);
      per_value.push_back({{"condition", x}, {"bimodality_coefficient", bc}});
    }
    entry["per_condition"] = per_value;
    entry["max_bimodality_coefficient"] = worst;
    entry["multimodal"] = worst > kUniformBc;
    entry["final_train_loss"] = f.train_loss_trace.empty() ? 0.0 : f.train_loss_trace.back();
    out.push_back(entry);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal structure discovery with simulator interventions"};
  app.require_subcommand(1);

  // bench
  auto* bench = app.add_subcommand("bench", "run the synthetic benchmark grid");
  std::string mechanisms = "linear";
  std::string graphs = "fork,chain,vstr,diamond,collider";
  std::vector<double> gammas{0.0, 0.2, 0.4, 0.6, 0.8};
  std::string bench_config_path;
  BenchConfig bc;
  std::string out_csv = "results.csv";
  std::string summary_csv;
  bool with_flow = false;
  bool published_baselines = false;
  DiscoveryFlags bench_flags;
  bench->add_option("--mechanism", mechanisms, "linear|nl1|nl2|nl3|nl4|nonlinear, comma separated");
  bench->add_option("--graphs", graphs, "comma separated topologies");
  bench->add_option("--gammas", gammas, "confounding strengths")->delimiter(',');
  bench->add_option("--seeds", bc.seeds, "replicates per cell");
  bench->add_option("--n-obs", bc.n_obs);
  bench->add_option("--n-int", bc.n_int, "interventional samples per variable");
  bench->add_option("--k", bc.K, "do-values per variable");
  bench->add_option("--eps-sim", bc.eps_sim, "simulator error std");
  bench->add_option("--base-seed", bc.base_seed);
  bench->add_option("--out", out_csv, "results CSV");
  bench->add_option("--summary-csv", summary_csv, "aggregated F1 CSV");
  bench->add_option("--workers", bc.workers);
  bench->add_option("--bench-config", bench_config_path, "JSON BenchConfig; command line flags override");
  bench->add_flag("--with-flow", with_flow, "train conditional flows in every run");
  bench->add_flag("--published-baselines", published_baselines, "print published comparison numbers");
  bench_flags.add(bench);

  // discover
  auto* disc = app.add_subcommand("discover", "run discovery on CSV data");
  std::string obs_path, int_dir, out_json;
  DiscoveryFlags disc_flags;
  disc->add_option("--obs", obs_path, "observational CSV")->required();
  disc->add_option("--int-dir", int_dir, "directory of int_target{i}.csv")->required();
  disc->add_option("--out", out_json, "result JSON (stdout if omitted)");
  disc_flags.add(disc);

  // sei
  auto* sei = app.add_subcommand("sei", "SEI capacity regression on DFT descriptors");
  std::string sei_table;
  std::string sei_out;
  sei->add_option("--table", sei_table, "CSV with additive,lumo_ev,f_count,capacity_pct,type")->required();
  sei->add_option("--out", sei_out, "JSON output");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "MMD, ATE and flow multimodality report");
  std::string diag_obs, diag_int, report_path;
  DiscoveryFlags diag_flags;
  diag->add_option("--obs", diag_obs)->required();
  diag->add_option("--int-dir", diag_int)->required();
  diag->add_option("--report", report_path, "report JSON (stdout if omitted)");
  diag_flags.add(diag);

  // simulate
  auto* simc = app.add_subcommand("simulate", "write synthetic observational and interventional CSVs");
  std::string sim_graph = "chain", sim_mech = "linear", sim_dir = "data/sim";
  double sim_gamma = 0.0;
  std::uint64_t sim_seed = 0;
  std::size_t sim_n_obs = 500, sim_n_int = 200, sim_k = 4;
  simc->add_option("--graph", sim_graph);
  simc->add_option("--mechanism", sim_mech);
  simc->add_option("--gamma", sim_gamma);
  simc->add_option("--seed", sim_seed);
  simc->add_option("--n-obs", sim_n_obs);
  simc->add_option("--n-int", sim_n_int);
  simc->add_option("--k", sim_k);
  simc->add_option("--dir", sim_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) {
      if (!bench_config_path.empty()) {
        const BenchConfig file_cfg = BenchConfig::from_json(read_json(bench_config_path));
        auto keep = [&](const char* flag) { return bench->count(flag) > 0; };
        BenchConfig merged = file_cfg;
        if (keep("--seeds")) merged.seeds = bc.seeds;
        if (keep("--n-obs")) merged.n_obs = bc.n_obs;
        if (keep("--n-int")) merged.n_int = bc.n_int;
        if (keep("--k")) merged.K = bc.K;
        if (keep("--eps-sim")) merged.eps_sim = bc.eps_sim;
        if (keep("--base-seed")) merged.base_seed = bc.base_seed;
        if (keep("--workers")) merged.workers = bc.workers;
        if (keep("--mechanism")) merged.mechanisms = parse_mechanisms(mechanisms);
        if (keep("--gammas")) merged.gammas = gammas;
        if (keep("--graphs")) {
          merged.graphs.clear();
          for (const auto& g : split_list(graphs)) merged.graphs.push_back(parse_topology(g));
        }
        bc = merged;
      } else {
        bc.mechanisms = parse_mechanisms(mechanisms);
        bc.gammas = gammas;
        bc.graphs.clear();
        for (const auto& g : split_list(graphs)) bc.graphs.push_back(parse_topology(g));
      }
      bc.discovery = bench_flags.apply(bc.discovery);
      if (with_flow) bc.discovery.train_flows = true;
      if (bench->count("--out") || !bc.output) bc.output = out_csv;
      bc.validate();

      std::size_t done = 0;
      const std::size_t total = bc.row_count();
      const auto t0 = std::chrono::steady_clock::now();
      const auto rows = run_grid(bc, [&](const ResultRow& r) {
        ++done;
        std::fprintf(stderr, "\r[%zu/%zu] %s %s gamma=%.1f seed=%zu f1=%s   ", done, total,
                     std::string(topology_name(r.graph)).c_str(), std::string(mechanism_name(r.mechanism)).c_str(),
                     r.gamma, r.seed, r.ok() ? format_double(r.f1).substr(0, 5).c_str() : "ERR");
      });
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "\n%zu rows in %.1f s, written to %s\n", rows.size(), secs, bc.output->string().c_str());
      const Summary s = aggregate(rows);
      std::cout << s.to_text(published_baselines);
      if (!summary_csv.empty()) {
        std::ofstream out(summary_csv);
        if (!out) throw Error("cannot write " + summary_csv);
        out << s.to_csv();
      }
      return s.errors ? 2 : 0;
    }

    if (*disc) {
      const DiscoveryConfig cfg = disc_flags.apply({});
      const DiscoveryResult res = discover_from_files(obs_path, int_dir, cfg);
      write_json(out_json, res.to_json());
      if (!out_json.empty()) {
        std::cout << "edges:";
        for (const Edge& e : res.graph.edges()) std::cout << ' ' << to_string(e);
        std::cout << '\n';
      }
      return 0;
    }

    if (*sei) {
      const auto t0 = std::chrono::steady_clock::now();
      const SeiFit fit = sei_regression(read_sei_table(sei_table));
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      std::printf("theta0      %8.3f\n", fit.theta0);
      std::printf("theta_lumo  %8.3f %%/eV\n", fit.theta_lumo);
      std::printf("theta_f     %8.3f %%/F atom\n", fit.theta_f);
      std::printf("R^2         %8.3f  (%zu observed additives)\n", fit.r2, fit.n_observed);
      for (const auto& p : fit.predictions) {
        std::printf("%-6s predicted %6.2f %% (anchor %s; plain regression %6.2f %%)\n", p.additive.c_str(),
                    p.capacity_pct, p.anchor.c_str(), p.regression_capacity_pct);
      }
      std::printf("elapsed %.2f ms\n", ms);
      if (!sei_out.empty()) write_json(sei_out, fit.to_json());
      return 0;
    }

    if (*diag) {
      DiscoveryConfig cfg = diag_flags.apply({});
      cfg.train_flows = true;
      const Dataset obs = read_dataset_csv(diag_obs);
      const auto ints = read_intervention_dir(diag_int, obs.d());
      const DiscoveryResult res = discover(obs, ints, cfg);
      nlohmann::json report;
      report["graph"] = to_json(res.graph.adjacency());
      report["ate"] = matrix_to_json(res.ate.e);
      report["statistic"] = matrix_to_json(res.statistic);
      report["mmd"] = res.mmd.to_json();
      report["flow_multimodality"] = multimodality_report(res, obs, cfg.flow.seed);
      report["config"] = cfg.to_json();
      write_json(report_path, report);
      return 0;
    }

    if (*simc) {
      const Topology topo = parse_topology(sim_graph);
      const Mechanism mech = parse_mechanism(sim_mech);
      ScmSpec spec;
      spec.graph = canonical_topology(topo);
      spec.weights = random_weights(spec.graph, sim_seed);
      spec.mechanism = mech;
      spec.gamma = sim_gamma;
      spec.seed = sim_seed;
      spec.validate();
      if (sim_k < 2 || sim_n_int < sim_k) throw Error("need K >= 2 and n_int >= K");
      const Dataset obs = sample_observational(spec, sim_n_obs);
      const ScmSimulator simulator(spec);
      const auto ints = acquire_interventions(simulator, obs, sim_k, sim_n_int / sim_k);
      std::filesystem::create_directories(sim_dir);
      write_dataset_csv(std::filesystem::path(sim_dir) / "obs.csv", obs);
      write_intervention_dir(std::filesystem::path(sim_dir) / "ints", ints);
      std::ofstream truth(std::filesystem::path(sim_dir) / "truth.json");
      truth << nlohmann::json{{"graph", to_json(spec.graph.adjacency())},
                              {"weights", matrix_to_json(spec.weights)},
                              {"mechanism", std::string(mechanism_name(mech))},
                              {"gamma", sim_gamma},
                              {"seed", sim_seed}}
                   .dump(2)
            << '\n';
      std::cout << "wrote " << sim_dir << "/obs.csv, " << sim_dir << "/ints/, " << sim_dir << "/truth.json\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
