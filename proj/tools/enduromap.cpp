// Command-line driver: endurance/delay map generation, per-cluster placement,
// full workload mapping with optional random-placement baseline, evaluation of
// stored solutions, and technology sweeps. Every command is deterministic for
// a fixed configuration and seed; wall time is printed, never written to files.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "enduromap/crossbar.hpp"
#include "enduromap/device.hpp"
#include "enduromap/errors.hpp"
#include "enduromap/mapping.hpp"
#include "enduromap/metrics.hpp"
#include "enduromap/parallel.hpp"
#include "enduromap/placement.hpp"
#include "enduromap/rng.hpp"
#include "enduromap/workload.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace enduromap;

namespace {

struct Options {
  int tech = 45;
  double temperature_c = 25.0;
  int size = 128;
  std::string crossbars = "unlimited";
  double drive = 0.0;  // 0 = per-node default
  std::string device_params_path;
  std::uint64_t seed = 0;
  long budget = 2000;  // placement iterations
  int restarts = 5;
  int patience = 50;
  long hc_budget = 5000;  // hill-climb evaluated moves
  int baseline = 0;
  bool exact = false;
  std::string output = "out";
  std::string sweep;

  std::string workload_path;
  std::string solution_path;
  ClusterId cluster_id = 0;

  // gen-workload
  int gen_clusters = 10;
  int gen_pre = 16;
  int gen_post = 16;
  double gen_density = 0.5;
  double gen_max_spikes = 6.42;
  double gen_mu = 0.0;
  double gen_sigma = 1.0;
  double gen_weight_mean = 0.0;
  double gen_weight_std = 1.0;
  std::string gen_frame = "image";
  std::string gen_out = "workload.json";
  std::string gen_histogram;
  int gen_histogram_bins = 20;
};

CrossbarConfig crossbar_config(const Options& o) {
  CrossbarConfig cfg;
  cfg.size = o.size;
  cfg.tech = TechnologyNode::standard(o.tech);
  cfg.temperature_c = o.temperature_c;
  cfg.drive_voltage = o.drive > 0.0 ? o.drive : default_drive_voltage(o.tech);
  cfg.validate();
  return cfg;
}

DeviceParams device_params(const Options& o) {
  if (o.device_params_path.empty()) return {};
  return load_device_params(o.device_params_path);
}

void write_manifest(const Options& o, const std::string& command, const fs::path& dir) {
  json j;
  j["command"] = command;
  j["tech_nm"] = o.tech;
  j["temperature_c"] = o.temperature_c;
  j["size"] = o.size;
  j["crossbars"] = o.crossbars;
  j["drive_voltage"] = o.drive > 0.0 ? o.drive : default_drive_voltage(o.tech);
  j["device_params"] = o.device_params_path.empty() ? json(nullptr) : json(o.device_params_path);
  j["seed"] = o.seed;
  j["budget"] = o.budget;
  j["restarts"] = o.restarts;
  j["patience"] = o.patience;
  j["hc_budget"] = o.hc_budget;
  j["baseline"] = o.baseline;
  j["exact"] = o.exact;
  if (!o.workload_path.empty()) j["workload"] = o.workload_path;
  if (!o.solution_path.empty()) j["solution"] = o.solution_path;
  if (!o.sweep.empty()) j["sweep"] = o.sweep;
  std::ofstream out(dir / "run_manifest.json");
  if (!out) throw ConfigError("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

Workload load_and_report(const std::string& path) {
  WorkloadFile f = load_workload(path);
  for (const std::string& w : f.warnings) std::cerr << "warning: " << w << '\n';
  return std::move(f.workload);
}

int parse_crossbars(const std::string& s, std::size_t n_clusters) {
  if (s == "unlimited") return static_cast<int>(n_clusters);
  int n = 0;
  try {
    n = std::stoi(s);
  } catch (const std::exception&) {
    throw ConfigError("--crossbars must be a positive integer or 'unlimited'");
  }
  if (n < 1) throw ConfigError("--crossbars must be >= 1");
  return n;
}

int run_endurance_map(const Options& o) {
  const CrossbarConfig cfg = crossbar_config(o);
  const DeviceParams dev = device_params(o);
  const CellMaps maps = build_cell_maps(cfg, dev);

  const fs::path dir = fs::path(o.output) / "maps";
  fs::create_directories(dir);

  write_grid_csv(maps.hrs_volts.volts, dir / "voltage_hrs.csv");
  write_grid_csv(maps.lrs_volts.volts, dir / "voltage_lrs.csv");
  write_grid_csv(maps.endurance.hrs, dir / "endurance_hrs.csv");
  write_grid_csv(maps.endurance.lrs, dir / "endurance_lrs.csv");
  write_grid_csv(maps.delay.ms, dir / "delay_ms.csv");
  write_map_metadata_json(cfg, "voltage_hrs", maps.hrs_volts.volts, dir / "voltage_hrs.meta.json");
  write_map_metadata_json(cfg, "voltage_lrs", maps.lrs_volts.volts, dir / "voltage_lrs.meta.json");
  write_map_metadata_json(cfg, "endurance_hrs", maps.endurance.hrs, dir / "endurance_hrs.meta.json");
  write_map_metadata_json(cfg, "endurance_lrs", maps.endurance.lrs, dir / "endurance_lrs.meta.json");
  write_map_metadata_json(cfg, "delay_ms", maps.delay.ms, dir / "delay_ms.meta.json");
  write_manifest(o, "endurance-map", o.output);

  std::cout << "maps written to " << dir.string() << "\n"
            << "  voltage (all-LRS): [" << maps.lrs_volts.volts.minCoeff() << ", "
            << maps.lrs_volts.volts.maxCoeff() << "] V\n"
            << "  voltage (all-HRS): [" << maps.hrs_volts.volts.minCoeff() << ", "
            << maps.hrs_volts.volts.maxCoeff() << "] V\n"
            << "  endurance (LRS): [" << maps.endurance.lrs.minCoeff() << ", "
            << maps.endurance.lrs.maxCoeff() << "] reads\n"
            << "  endurance (HRS): [" << maps.endurance.hrs.minCoeff() << ", "
            << maps.endurance.hrs.maxCoeff() << "] reads\n"
            << "  kirchhoff residual: " << maps.lrs_volts.kirchhoff_residual << "\n";
  return 0;
}

int run_gen_workload(const Options& o) {
  SyntheticSpec spec;
  spec.n_clusters = o.gen_clusters;
  spec.pre_per_cluster = o.gen_pre;
  spec.post_per_cluster = o.gen_post;
  spec.density = o.gen_density;
  spec.max_spikes = o.gen_max_spikes;
  spec.spike_lognorm_mu = o.gen_mu;
  spec.spike_lognorm_sigma = o.gen_sigma;
  spec.weight_mean = o.gen_weight_mean;
  spec.weight_stddev = o.gen_weight_std;
  spec.frame_semantics = frame_semantics_from_string(o.gen_frame);
  const Workload w = generate_synthetic(spec, o.seed);
  if (const fs::path parent = fs::path(o.gen_out).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  save_workload(w, o.gen_out);
  if (!o.gen_histogram.empty()) {
    write_histogram_csv(spike_histogram(w, o.gen_histogram_bins), o.gen_histogram);
  }
  std::size_t synapses = 0;
  for (const Cluster& c : w.clusters) synapses += c.synapses.size();
  std::cout << "workload written to " << o.gen_out << " (" << w.clusters.size()
            << " clusters, " << synapses << " synapses)\n";
  return 0;
}

int run_place(const Options& o) {
  const Workload w = load_and_report(o.workload_path);
  const Cluster* cluster = w.find_cluster(o.cluster_id);
  if (!cluster) {
    throw ConfigError("workload has no cluster with id " + std::to_string(o.cluster_id));
  }
  const CellMaps maps = build_cell_maps(crossbar_config(o), device_params(o));

  const PlacementResult result =
      o.exact ? brute_force_place(*cluster, maps.endurance)
              : optimize_placement(*cluster, maps.endurance, {o.budget, o.restarts},
                                   rng::derive(o.seed, static_cast<std::uint64_t>(cluster->id)));

  const fs::path dir = fs::path(o.output) / "placements";
  fs::create_directories(dir);
  const fs::path file = dir / ("cluster_" + std::to_string(cluster->id) + ".json");
  write_placement_json(*cluster, result, file);
  write_manifest(o, "place", o.output);

  std::cout << "placement written to " << file.string() << "\n  lifetime: " << result.lifetime
            << " frames";
  if (result.limiting_synapse) {
    std::cout << " (limited by synapse " << result.limiting_synapse->first << " -> "
              << result.limiting_synapse->second << ")";
  }
  std::cout << "\n";
  return 0;
}

struct MapRunResult {
  double lifetime = 0.0;
  std::optional<double> lifetime_ratio;
  std::optional<double> delay_ratio;
  std::optional<double> voltage_ratio;
};

MapRunResult run_map_once(const Options& o, const Workload& w, const fs::path& outdir) {
  const CrossbarConfig cfg = crossbar_config(o);
  const DeviceParams dev = device_params(o);
  const CellMaps maps = build_cell_maps(cfg, dev);

  HardwareConfig hw;
  hw.crossbar = cfg;
  hw.n_crossbars = parse_crossbars(o.crossbars, w.clusters.size());

  const auto t0 = std::chrono::steady_clock::now();
  MappingSolution sol;
  if (o.crossbars == "unlimited") {
    sol = map_unlimited(w, maps.endurance, {o.budget, o.restarts}, o.seed);
  } else {
    HillClimbParams params;
    params.budget = o.hc_budget;
    params.patience = o.patience;
    params.placement = {o.budget, o.restarts};
    sol = hill_climb_map(w, hw, maps.endurance, params, o.seed);
  }
  const auto t1 = std::chrono::steady_clock::now();
  validate_solution(w, hw.n_crossbars, cfg.size, sol);

  std::optional<BaselineDistribution> baseline;
  if (o.baseline > 0) {
    baseline = random_baseline(w, hw, maps, o.baseline, rng::derive(o.seed, 0xba5e11e5ULL));
  }
  const EvaluationReport report = evaluate(w, sol, maps, baseline);

  fs::create_directories(outdir / "solutions");
  fs::create_directories(outdir / "reports");
  write_solution_json(sol, hw, outdir / "solutions" / "solution.json");
  write_report_json(report, outdir / "reports" / "report.json");
  write_report_csv(report, outdir / "reports" / "report.csv");

  const double secs = std::chrono::duration<double>(t1 - t0).count();
  std::cout << "mapped " << w.clusters.size() << " clusters onto " << hw.n_crossbars
            << " crossbars (" << o.tech << " nm, " << o.temperature_c << " C, M = "
            << cfg.size << ")\n  overall lifetime: " << report.overall_lifetime
            << " frames\n  hardware delay: " << report.hardware_delay_ms
            << " ms\n  avg RRAM voltage: " << report.avg_rram_voltage << " V\n"
            << "  search: " << sol.search_stats.evaluated << " evaluated, "
            << sol.search_stats.accepted << " accepted, wall time " << secs << " s\n";
  if (report.lifetime_ratio) {
    std::cout << "  vs baseline median: lifetime x" << *report.lifetime_ratio << ", delay x"
              << *report.delay_ratio << ", voltage x" << *report.voltage_ratio << "\n";
  }

  MapRunResult r;
  r.lifetime = report.overall_lifetime;
  r.lifetime_ratio = report.lifetime_ratio;
  r.delay_ratio = report.delay_ratio;
  r.voltage_ratio = report.voltage_ratio;
  return r;
}

std::pair<std::string, std::vector<std::string>> parse_sweep(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= s.size()) {
    throw ConfigError("--sweep expects KEY=V1,V2,...");
  }
  const std::string key = s.substr(0, eq);
  std::vector<std::string> values;
  std::istringstream rest(s.substr(eq + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    if (!item.empty()) values.push_back(item);
  }
  if (values.empty()) throw ConfigError("--sweep expects at least one value");
  return {key, values};
}

Options with_sweep_value(const Options& base, const std::string& key, const std::string& value) {
  Options o = base;
  if (key == "tech") {
    o.tech = std::stoi(value);
  } else if (key == "temp") {
    o.temperature_c = std::stod(value);
  } else if (key == "size") {
    o.size = std::stoi(value);
  } else if (key == "crossbars") {
    o.crossbars = value;
  } else if (key == "seed") {
    o.seed = std::stoull(value);
  } else if (key == "drive") {
    o.drive = std::stod(value);
  } else {
    throw ConfigError("--sweep key must be one of tech, temp, size, crossbars, seed, drive");
  }
  return o;
}

int run_map(const Options& o) {
  const Workload w = load_and_report(o.workload_path);

  if (o.sweep.empty()) {
    fs::create_directories(o.output);
    run_map_once(o, w, o.output);
    write_manifest(o, "map", o.output);
    return 0;
  }

  const auto [key, values] = parse_sweep(o.sweep);
  fs::create_directories(o.output);
  std::ofstream table(fs::path(o.output) / ("sweep_" + key + ".csv"));
  table << key << ",overall_lifetime_frames,lifetime_ratio,delay_ratio,voltage_ratio\n";
  for (const std::string& value : values) {
    const Options run = with_sweep_value(o, key, value);
    const fs::path subdir = fs::path(o.output) / ("sweep_" + key + "_" + value);
    fs::create_directories(subdir);
    std::cout << "--- " << key << " = " << value << " ---\n";
    const MapRunResult r = run_map_once(run, w, subdir);
    write_manifest(run, "map", subdir);
    table << value << ',' << (std::isfinite(r.lifetime) ? format_double(r.lifetime) : "inf");
    auto cell = [&](const std::optional<double>& v) {
      table << ',';
      if (v) table << format_double(*v);
    };
    cell(r.lifetime_ratio);
    cell(r.delay_ratio);
    cell(r.voltage_ratio);
    table << '\n';
  }
  write_manifest(o, "map", o.output);
  std::cout << "sweep table written to "
            << (fs::path(o.output) / ("sweep_" + key + ".csv")).string() << "\n";
  return 0;
}

int run_evaluate(const Options& o) {
  const Workload w = load_and_report(o.workload_path);
  const CrossbarConfig cfg = crossbar_config(o);
  const DeviceParams dev = device_params(o);
  const CellMaps maps = build_cell_maps(cfg, dev);

  // the stored hardware block fixes the crossbar count
  int n_crossbars = 0;
  {
    std::ifstream in(o.solution_path);
    if (!in) throw ValidationError("cannot open solution file: " + o.solution_path);
    json j;
    try {
      j = json::parse(in);
      n_crossbars = j.at("hardware").at("n_crossbars").get<int>();
    } catch (const json::exception& e) {
      throw ValidationError("solution file " + o.solution_path + ": " + e.what());
    }
  }

  const MappingSolution sol = load_solution_json(o.solution_path, w, maps.endurance);
  validate_solution(w, n_crossbars, cfg.size, sol);

  HardwareConfig hw;
  hw.crossbar = cfg;
  hw.n_crossbars = n_crossbars;
  std::optional<BaselineDistribution> baseline;
  if (o.baseline > 0) {
    baseline = random_baseline(w, hw, maps, o.baseline, rng::derive(o.seed, 0xba5e11e5ULL));
  }
  const EvaluationReport report = evaluate(w, sol, maps, baseline);

  fs::create_directories(fs::path(o.output) / "reports");
  write_report_json(report, fs::path(o.output) / "reports" / "report.json");
  write_report_csv(report, fs::path(o.output) / "reports" / "report.csv");
  write_manifest(o, "evaluate", o.output);

  std::cout << "evaluation report written to "
            << (fs::path(o.output) / "reports" / "report.json").string()
            << "\n  overall lifetime: " << report.overall_lifetime << " frames\n";
  return 0;
}

void add_hardware_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--tech", o.tech, "technology node in nm (65, 45, 32, 16)")
      ->check(CLI::IsMember({65, 45, 32, 16}));
  cmd->add_option("--temp", o.temperature_c, "operating temperature in C");
  cmd->add_option("--size", o.size, "crossbar dimension M")->check(CLI::PositiveNumber);
  cmd->add_option("--drive", o.drive, "drive voltage (default: per-node calibration)");
  cmd->add_option("--device-params", o.device_params_path,
                  "device parameter file (key = value lines)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RRAM crossbar read-endurance modeling and lifetime-aware synapse mapping"};
  app.require_subcommand(1);
  Options o;

  CLI::App* em = app.add_subcommand("endurance-map",
                                    "write voltage, endurance and delay maps for one node");
  add_hardware_flags(em, o);
  em->add_option("--output", o.output, "output directory");

  CLI::App* gw = app.add_subcommand("gen-workload", "generate a synthetic clustered workload");
  gw->add_option("--clusters", o.gen_clusters, "number of clusters")->check(CLI::PositiveNumber);
  gw->add_option("--pre", o.gen_pre, "pre-neurons per cluster")->check(CLI::PositiveNumber);
  gw->add_option("--post", o.gen_post, "post-neurons per cluster")->check(CLI::PositiveNumber);
  gw->add_option("--density", o.gen_density, "synapse density in (0, 1]");
  gw->add_option("--max-spikes", o.gen_max_spikes, "maximum spikes per frame");
  gw->add_option("--mu", o.gen_mu, "log-normal mu of spike rates");
  gw->add_option("--sigma", o.gen_sigma, "log-normal sigma of spike rates");
  gw->add_option("--weight-mean", o.gen_weight_mean, "mean synaptic weight");
  gw->add_option("--weight-std", o.gen_weight_std, "weight standard deviation (0 = constant)");
  gw->add_option("--frame-semantics", o.gen_frame, "image or 500ms-window");
  gw->add_option("--seed", o.seed, "generator seed");
  gw->add_option("--out", o.gen_out, "output workload file");
  gw->add_option("--histogram", o.gen_histogram, "also write a per-synapse spike histogram CSV");
  gw->add_option("--histogram-bins", o.gen_histogram_bins, "histogram bin count")
      ->check(CLI::PositiveNumber);

  CLI::App* pl = app.add_subcommand("place", "solve the row/column placement of one cluster");
  add_hardware_flags(pl, o);
  pl->add_option("--workload", o.workload_path, "workload JSON file")->required();
  pl->add_option("--cluster", o.cluster_id, "cluster id")->required();
  pl->add_option("--seed", o.seed, "solver seed");
  pl->add_option("--budget", o.budget, "local-search iterations per restart");
  pl->add_option("--restarts", o.restarts, "local-search restarts");
  pl->add_flag("--exact", o.exact, "use the exhaustive oracle (small clusters only)");
  pl->add_option("--output", o.output, "output directory");

  CLI::App* mp = app.add_subcommand("map", "map a workload onto the hardware");
  add_hardware_flags(mp, o);
  mp->add_option("--workload", o.workload_path, "workload JSON file")->required();
  mp->add_option("--crossbars", o.crossbars, "crossbar count or 'unlimited'");
  mp->add_option("--seed", o.seed, "master seed");
  mp->add_option("--budget", o.budget, "placement iterations per restart");
  mp->add_option("--restarts", o.restarts, "placement restarts");
  mp->add_option("--patience", o.patience, "hill-climb rejected-move patience");
  mp->add_option("--hc-budget", o.hc_budget, "hill-climb evaluated-move budget");
  mp->add_option("--baseline", o.baseline, "random-placement baseline sample count");
  mp->add_option("--output", o.output, "output directory");
  mp->add_option("--sweep", o.sweep, "repeat per value: KEY=V1,V2,... (tech, temp, size, crossbars, seed, drive)");

  CLI::App* ev = app.add_subcommand("evaluate", "recompute metrics for a stored solution");
  add_hardware_flags(ev, o);
  ev->add_option("--workload", o.workload_path, "workload JSON file")->required();
  ev->add_option("--solution", o.solution_path, "solution JSON file")->required();
  ev->add_option("--seed", o.seed, "baseline seed");
  ev->add_option("--baseline", o.baseline, "random-placement baseline sample count");
  ev->add_option("--output", o.output, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (em->parsed()) return run_endurance_map(o);
    if (gw->parsed()) return run_gen_workload(o);
    if (pl->parsed()) return run_place(o);
    if (mp->parsed()) return run_map(o);
    if (ev->parsed()) return run_evaluate(o);
  } catch (const InfeasibleError& e) {
    std::cerr << "error (infeasible): " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error (numerical): " << e.what() << '\n';
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error (config): " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error (validation): " << e.what() << '\n';
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "error (model): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
