#include "enduromap/crossbar.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "enduromap/errors.hpp"
#include "enduromap/parallel.hpp"

namespace enduromap {

using json = nlohmann::json;

StateGrid uniform_states(int m, ResistanceState s) {
  return StateGrid::Constant(m, m, static_cast<std::uint8_t>(s));
}

TechnologyNode TechnologyNode::standard(int nm) {
  int idx = -1;
  switch (nm) {
    case 65: idx = 0; break;
    case 45: idx = 1; break;
    case 32: idx = 2; break;
    case 16: idx = 3; break;
    default:
      throw ConfigError("unsupported technology node: " + std::to_string(nm) +
                        " nm (supported: 65, 45, 32, 16)");
  }
  return {nm, std::pow(3.8, idx / 3.0)};
}

double default_drive_voltage(int node_nm) {
  switch (node_nm) {
    case 65: return 0.575375;
    case 45: return 0.683143;
    case 32: return 0.853862;
    case 16: return 1.122507;
    default:
      throw ConfigError("no default drive voltage for node " + std::to_string(node_nm));
  }
}

void CrossbarConfig::validate() const {
  if (size < 1) throw ConfigError("crossbar size must be >= 1");
  if (!(drive_voltage > 0.0)) throw ConfigError("drive voltage must be positive");
  if (!(cell_on_resistance > 0.0)) throw ConfigError("cell on-resistance must be positive");
  if (!(cell_off_resistance > cell_on_resistance)) {
    throw ConfigError("cell off-resistance must exceed on-resistance");
  }
  if (!(sense_resistance > 0.0)) throw ConfigError("sense resistance must be positive");
  if (!(tech.unit_parasitic_resistance >= 0.0)) {
    throw ConfigError("unit parasitic resistance must be non-negative");
  }
}

double temperature_adjusted_drive(const CrossbarConfig& cfg) {
  const double t = std::clamp(cfg.temperature_c, 0.0, 100.0);
  return cfg.drive_voltage * (1.0 + cfg.drive_temperature_coefficient * (t - 25.0));
}

namespace {

double state_resistance(const CrossbarConfig& cfg, std::uint8_t s, int k, int l) {
  const auto state = static_cast<ResistanceState>(s);
  const double r = is_lrs(state) ? cfg.cell_on_resistance : cfg.cell_off_resistance;
  if (!(r > 0.0) || !std::isfinite(r)) {
    std::ostringstream os;
    os << "singular network: non-positive cell resistance at cell (" << k << ", " << l << ")";
    throw NumericalError(os.str());
  }
  return r;
}

// With zero parasitic resistance every wordline node sits at the drive
// voltage and each column collapses to one bitline node; solve the scalar
// divider per column.
VoltageMap solve_no_parasitics(const CrossbarConfig& cfg, const StateGrid& states,
                               double drive) {
  const int m = cfg.size;
  VoltageMap out;
  out.volts = Grid::Zero(m, m);
  double total_current = 0.0;
  for (int l = 0; l < m; ++l) {
    double gsum = 0.0;
    for (int k = 0; k < m; ++k) gsum += 1.0 / state_resistance(cfg, states(k, l), k, l);
    const double vb = drive * gsum / (1.0 / cfg.sense_resistance + gsum);
    for (int k = 0; k < m; ++k) out.volts(k, l) = drive - vb;
    total_current += (drive - vb) * gsum;
  }
  out.drive_current = total_current;
  out.kirchhoff_residual = 0.0;
  return out;
}

}  // namespace

VoltageMap solve_voltage_map(const CrossbarConfig& cfg, const StateGrid& states) {
  cfg.validate();
  const int m = cfg.size;
  if (states.rows() != m || states.cols() != m) {
    throw ConfigError("state grid dimension does not match crossbar size");
  }
  const double drive = temperature_adjusted_drive(cfg);
  const double rp = cfg.tech.unit_parasitic_resistance;
  if (rp == 0.0) return solve_no_parasitics(cfg, states, drive);

  const int n = 2 * m * m;
  const auto wnode = [m](int k, int l) { return k * m + l; };
  const auto bnode = [m](int k, int l) { return m * m + k * m + l; };

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(8) * m * m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);

  const double gp = 1.0 / rp;
  const double gout = 1.0 / (rp + cfg.sense_resistance);

  auto couple = [&](int a, int b, double g) {
    trips.emplace_back(a, a, g);
    trips.emplace_back(b, b, g);
    trips.emplace_back(a, b, -g);
    trips.emplace_back(b, a, -g);
  };

  for (int k = 0; k < m; ++k) {
    trips.emplace_back(wnode(k, 0), wnode(k, 0), gp);  // driver through one segment
    rhs[wnode(k, 0)] += gp * drive;
    for (int l = 0; l + 1 < m; ++l) couple(wnode(k, l), wnode(k, l + 1), gp);
  }
  for (int l = 0; l < m; ++l) {
    for (int k = 0; k + 1 < m; ++k) couple(bnode(k, l), bnode(k + 1, l), gp);
    trips.emplace_back(bnode(m - 1, l), bnode(m - 1, l), gout);  // exit segment + sense
  }
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) {
      couple(wnode(k, l), bnode(k, l), 1.0 / state_resistance(cfg, states(k, l), k, l));
    }
  }

  Eigen::SparseMatrix<double> G(n, n);
  G.setFromTriplets(trips.begin(), trips.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(G);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("crossbar nodal solve: factorization failed (singular network)");
  }
  Eigen::VectorXd x = solver.solve(rhs);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("crossbar nodal solve: back-substitution failed");
  }
  // one refinement pass keeps the Kirchhoff residual at solver noise
  x += solver.solve(rhs - G * x);

  VoltageMap out;
  out.volts = Grid::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) out.volts(k, l) = x[wnode(k, l)] - x[bnode(k, l)];
  }

  double total_current = 0.0;
  for (int k = 0; k < m; ++k) total_current += (drive - x[wnode(k, 0)]) * gp;
  out.drive_current = total_current;
  const Eigen::VectorXd residual = G * x - rhs;
  out.kirchhoff_residual =
      residual.cwiseAbs().maxCoeff() / std::max(total_current, 1e-300);

  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) {
      const double v = out.volts(k, l);
      if (!(v > 0.0) || v > drive * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "crossbar nodal solve: cell voltage out of (0, drive] at cell (" << k
           << ", " << l << "): " << v;
        throw NumericalError(os.str());
      }
    }
  }
  return out;
}

EnduranceMap build_endurance_maps(const CrossbarConfig& cfg, const DeviceParams& dev) {
  const int m = cfg.size;
  const double temperature_k = 273.15 + cfg.temperature_c;
  const VoltageMap vh = solve_voltage_map(cfg, uniform_states(m, ResistanceState::HRS));
  const VoltageMap vl = solve_voltage_map(cfg, uniform_states(m, ResistanceState::LRS1));

  EnduranceMap maps;
  maps.m = m;
  maps.hrs = Grid::Zero(m, m);
  maps.lrs = Grid::Zero(m, m);
  // HRS cells integrate the gap ODE; parallel over rows
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t k) {
    for (int l = 0; l < m; ++l) {
      maps.hrs(k, l) = read_endurance(ResistanceState::HRS, vh.volts(k, l), temperature_k, dev);
      maps.lrs(k, l) = read_endurance(ResistanceState::LRS1, vl.volts(k, l), temperature_k, dev);
    }
  });
  return maps;
}

DelayMap build_delay_map(const CrossbarConfig& cfg, double base_delay_ms,
                         double per_segment_delay_ms) {
  if (!(base_delay_ms > 0.0) || !(per_segment_delay_ms >= 0.0)) {
    throw ConfigError("delay map constants must be positive");
  }
  const int m = cfg.size;
  DelayMap d;
  d.base_delay_ms = base_delay_ms;
  d.per_segment_delay_ms = per_segment_delay_ms;
  d.ms = Grid::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) {
      d.ms(k, l) = base_delay_ms + per_segment_delay_ms * path_segments(k, l, m);
    }
  }
  return d;
}

CellMaps build_cell_maps(const CrossbarConfig& cfg, const DeviceParams& dev) {
  CellMaps maps;
  maps.cfg = cfg;
  maps.hrs_volts = solve_voltage_map(cfg, uniform_states(cfg.size, ResistanceState::HRS));
  maps.lrs_volts = solve_voltage_map(cfg, uniform_states(cfg.size, ResistanceState::LRS1));
  maps.delay = build_delay_map(cfg);

  const double temperature_k = 273.15 + cfg.temperature_c;
  maps.endurance.m = cfg.size;
  maps.endurance.hrs = Grid::Zero(cfg.size, cfg.size);
  maps.endurance.lrs = Grid::Zero(cfg.size, cfg.size);
  parallel_for(static_cast<std::size_t>(cfg.size), [&](std::size_t k) {
    for (int l = 0; l < cfg.size; ++l) {
      maps.endurance.hrs(k, l) =
          read_endurance(ResistanceState::HRS, maps.hrs_volts.volts(k, l), temperature_k, dev);
      maps.endurance.lrs(k, l) =
          read_endurance(ResistanceState::LRS1, maps.lrs_volts.volts(k, l), temperature_k, dev);
    }
  });
  return maps;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_grid_csv(const Grid& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write CSV file: " + path.string());
  for (Eigen::Index k = 0; k < g.rows(); ++k) {
    for (Eigen::Index l = 0; l < g.cols(); ++l) {
      if (l) out << ',';
      out << format_double(g(k, l));
    }
    out << '\n';
  }
}

void write_map_metadata_json(const CrossbarConfig& cfg, const std::string& name,
                             const Grid& g, const std::filesystem::path& path) {
  json j;
  j["map"] = name;
  j["size"] = cfg.size;
  j["technology_nm"] = cfg.tech.node_nm;
  j["unit_parasitic_resistance_ohm"] = cfg.tech.unit_parasitic_resistance;
  j["temperature_c"] = cfg.temperature_c;
  j["drive_voltage_v"] = cfg.drive_voltage;
  j["adjusted_drive_voltage_v"] = temperature_adjusted_drive(cfg);
  j["cell_on_resistance_ohm"] = cfg.cell_on_resistance;
  j["cell_off_resistance_ohm"] = cfg.cell_off_resistance;
  j["sense_resistance_ohm"] = cfg.sense_resistance;
  j["min"] = g.minCoeff();
  j["max"] = g.maxCoeff();
  j["mean"] = g.mean();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write metadata file: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace enduromap
