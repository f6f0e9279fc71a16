#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "enduromap/crossbar.hpp"
#include "enduromap/rng.hpp"
#include "enduromap/workload.hpp"

namespace enduromap {

// Injective assignment of pre-neurons to rows (input ports) and post-neurons
// to columns (output ports) of one crossbar.
struct Placement {
  std::map<NeuronId, int> row_of;
  std::map<NeuronId, int> col_of;

  friend bool operator==(const Placement&, const Placement&) = default;
};

// Throws ValidationError unless the placement covers every neuron of the
// cluster, is injective on both sides and stays inside [0, m).
void validate_placement(const Cluster& c, const Placement& p, int m);

// Frames before the synapse's cell must be reprogrammed:
// endurance(state)(row, col) / spikes. Zero spikes -> +infinity (never read).
double synapse_lifetime(ResistanceState state, double spikes_per_frame, int row,
                        int col, const EnduranceMap& maps);

struct LifetimeEval {
  double lifetime = 0.0;
  std::optional<std::pair<NeuronId, NeuronId>> limiting;  // none if unbounded
};

// Cluster lifetime = min over synapses of synapse_lifetime at the assigned
// cell. Empty or all-zero-spike clusters evaluate to +infinity.
LifetimeEval lifetime_of_placement(const Cluster& c, const Placement& p,
                                   const EnduranceMap& maps);

struct SolverStats {
  long iterations = 0;
  int restarts = 0;
  bool oracle_used = false;
  std::vector<double> best_trace;  // best-so-far lifetime per restart improvement
};

struct PlacementResult {
  Placement placement;
  double lifetime = 0.0;
  std::optional<std::pair<NeuronId, NeuronId>> limiting_synapse;
  SolverStats stats;
};

inline constexpr std::uint64_t kDefaultEnumerationLimit = 2'000'000;

// Exact optimum by enumerating all injective row/column assignments; ties
// resolved to the lexicographically smallest (row vector, col vector) in
// neuron-id order. Throws InfeasibleError above the enumeration limit.
PlacementResult brute_force_place(const Cluster& c, const EnduranceMap& maps,
                                  std::uint64_t max_assignments = kDefaultEnumerationLimit);

struct PlacementBudget {
  long iterations = 2000;  // evaluated moves per restart
  int restarts = 5;        // restart 0 seeds greedily, the rest randomly
};

// Local search maximizing the minimum per-synapse lifetime: greedy seed
// (synapses by descending spikes onto the best free cells) plus random
// restarts; moves swap two rows, swap two columns, or relocate a neuron to a
// free port; strictly improving moves accepted. Deterministic given seed;
// the result never falls below the greedy seed.
PlacementResult optimize_placement(const Cluster& c, const EnduranceMap& maps,
                                   const PlacementBudget& budget, std::uint64_t seed);

// Uniform-random valid placement (injective rows and columns).
Placement random_placement(const Cluster& c, int m, rng::Stream& stream);

void write_placement_json(const Cluster& c, const PlacementResult& r,
                          const std::filesystem::path& path);

}  // namespace enduromap
