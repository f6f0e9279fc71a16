#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

#include "enduromap/device.hpp"

namespace enduromap {

// Grids are indexed (row k, col l). Row M-1 is the bottom row, column 0 the
// leftmost. Inputs drive rows from the left and columns read out at the
// bottom, so (M-1, 0) is the electrically shortest cell: it sees the highest
// voltage, the lowest endurance and the smallest propagation delay.
using Grid = Eigen::ArrayXXd;
using StateGrid = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

StateGrid uniform_states(int m, ResistanceState s);

// wire segments between the row input port and the column output port
inline int path_segments(int row, int col, int m) { return col + (m - 1 - row); }

struct TechnologyNode {
  int node_nm = 45;
  double unit_parasitic_resistance = 1.0;  // ohms per electrode segment

  // {65, 45, 32, 16} nm; parasitic resistance runs geometrically from the
  // 1 ohm (65 nm) to 3.8 ohm (16 nm) endpoints: ~1.56 at 45, ~2.44 at 32.
  static TechnologyNode standard(int nm);
};

// Per-node default drive, calibrated at M=128 / 25 C / all-LRS so every node
// pins its weakest cell at the same voltage; lands max cell voltage at
// 0.570 V (65 nm) and 1.100 V (16 nm).
double default_drive_voltage(int node_nm);

struct CrossbarConfig {
  int size = 128;
  TechnologyNode tech = TechnologyNode::standard(45);
  double temperature_c = 25.0;
  double drive_voltage = default_drive_voltage(45);
  double cell_on_resistance = 35501.0;    // LRS, ohms
  double cell_off_resistance = 355010.0;  // HRS, ohms
  double sense_resistance = 1.0;          // column readout, ohms
  double drive_temperature_coefficient = 0.002;  // 1/degC leakage compensation

  void validate() const;  // throws ConfigError
};

// drive_voltage * (1 + lambda * (T - 25 C)); T clamped to [0, 100] C.
double temperature_adjusted_drive(const CrossbarConfig& cfg);

struct VoltageMap {
  Grid volts;                      // per-cell voltage difference, (0, drive]
  double kirchhoff_residual = 0.0; // max nodal imbalance / total drive current
  double drive_current = 0.0;      // amps delivered by the row drivers
};

// Nodal analysis of the 2*M*M-node resistive network: each cell couples its
// wordline node to its bitline node through the state's resistance,
// consecutive line nodes couple through the unit parasitic resistance, rows
// are driven at the temperature-adjusted drive, columns terminate through the
// sense resistance. Deterministic.
VoltageMap solve_voltage_map(const CrossbarConfig& cfg, const StateGrid& states);

struct EnduranceMap {
  Grid hrs;  // reads, all-HRS programming
  Grid lrs;  // reads, all-LRS programming
  int m = 0;
};

// Two uniform-programming voltage maps (all-HRS, all-LRS) pushed cell-wise
// through the device endurance law.
EnduranceMap build_endurance_maps(const CrossbarConfig& cfg,
                                  const DeviceParams& dev = {});

struct DelayMap {
  Grid ms;
  double base_delay_ms = 0.1;
  double per_segment_delay_ms = 1e-4;
};

// delay(k,l) = base + per_segment * path_segments(k,l). Default constants put
// the longest/shortest ratio at M=128 near 1.25.
DelayMap build_delay_map(const CrossbarConfig& cfg, double base_delay_ms = 0.1,
                         double per_segment_delay_ms = 1e-4);

// All per-cell maps derived from one configuration.
struct CellMaps {
  CrossbarConfig cfg;
  VoltageMap hrs_volts;
  VoltageMap lrs_volts;
  EnduranceMap endurance;
  DelayMap delay;
};

CellMaps build_cell_maps(const CrossbarConfig& cfg, const DeviceParams& dev = {});

// CSV, one line per crossbar row, shortest round-trip doubles; byte-stable
// across runs for identical inputs.
void write_grid_csv(const Grid& g, const std::filesystem::path& path);

// JSON sidecar: config, map name, extrema.
void write_map_metadata_json(const CrossbarConfig& cfg, const std::string& name,
                             const Grid& g, const std::filesystem::path& path);

std::string format_double(double v);  // shortest round-trip representation

}  // namespace enduromap
