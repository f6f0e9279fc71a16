#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "enduromap/mapping.hpp"

namespace enduromap {

// Delay of one mapped synapse: the delay-map entry at its cell.
double synapse_delay(const Placement& p, const Synapse& s, const DelayMap& d);

// Spike-weighted mean synapse delay of a cluster under a placement. When all
// spikes are zero the unweighted mean is used (flagged in reports).
double cluster_delay(const Cluster& c, const Placement& p, const DelayMap& d);

// Spike-weighted mean of cluster delays, weights = total cluster spikes.
// Algebraically identical to the flat spike-weighted mean over all synapses.
double hardware_delay(const MappingSolution& sol, const DelayMap& d);

// Unweighted mean of the per-state voltage-map entries over occupied cells.
double average_rram_voltage(const MappingSolution& sol, const Grid& hrs_volts,
                            const Grid& lrs_volts);

struct MetricSample {
  double lifetime = 0.0;
  double delay_ms = 0.0;
  double voltage = 0.0;
};

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

struct BaselineDistribution {
  std::vector<MetricSample> samples;  // one per baseline seed
  Quartiles lifetime;
  Quartiles delay_ms;
  Quartiles voltage;
};

Quartiles quartiles(std::vector<double> values);

// Arbitrary-placement reference: uniform-random valid placements with
// round-robin cluster-to-crossbar assignment, n_seeds independent samples.
// Deterministic per master seed.
BaselineDistribution random_baseline(const Workload& w, const HardwareConfig& hw,
                                     const CellMaps& maps, int n_seeds,
                                     std::uint64_t seed, int threads = 0);

struct EvaluationReport {
  double overall_lifetime = 0.0;
  std::vector<std::pair<ClusterId, double>> per_cluster_lifetimes;
  double hardware_delay_ms = 0.0;
  std::vector<std::pair<ClusterId, double>> per_cluster_delays_ms;
  double avg_rram_voltage = 0.0;
  bool zero_spike_delay_fallback = false;
  std::optional<BaselineDistribution> baseline;
  // this/baseline-median, present iff baseline is
  std::optional<double> lifetime_ratio;
  std::optional<double> delay_ratio;
  std::optional<double> voltage_ratio;
};

EvaluationReport evaluate(const Workload& w, const MappingSolution& sol,
                          const CellMaps& maps,
                          std::optional<BaselineDistribution> baseline = {});

void write_report_json(const EvaluationReport& r, const std::filesystem::path& path);
void write_report_csv(const EvaluationReport& r, const std::filesystem::path& path);

}  // namespace enduromap
