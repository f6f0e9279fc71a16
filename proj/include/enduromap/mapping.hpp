#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "enduromap/placement.hpp"

namespace enduromap {

// Homogeneous crossbars; process variation across crossbars is not modeled,
// so cluster lifetime is independent of which crossbar hosts it.
struct HardwareConfig {
  int n_crossbars = 1;
  CrossbarConfig crossbar;
};

struct CrossbarSolution {
  std::vector<ClusterId> clusters;           // members, ascending
  std::optional<Cluster> merged;             // nullopt for an empty crossbar
  std::optional<PlacementResult> placement;
};

struct SearchStats {
  long evaluated = 0;
  long accepted = 0;
  std::vector<double> accepted_trace;  // strictly increasing (initial value first)
};

struct MappingSolution {
  std::map<ClusterId, int> assign;          // one crossbar per cluster
  std::vector<CrossbarSolution> per_crossbar;
  double lifetime = 0.0;                    // min over finite crossbar lifetimes
  SearchStats search_stats;
};

// Set union of the clusters' neuron sets and synapses; shared neuron ids
// deduplicate. Conflicting duplicates (same (pre, post) with different
// weight, or same pre-neuron id with different spike rate) are errors.
Cluster merge_clusters(const Cluster& a, const Cluster& b);

// One cluster per crossbar, each placed independently at full budget.
MappingSolution map_unlimited(const Workload& w, const EnduranceMap& maps,
                              const PlacementBudget& budget = {},
                              std::uint64_t seed = 0, int threads = 0);

struct HillClimbParams {
  long budget = 5000;   // evaluated relocation moves
  int patience = 50;    // consecutive rejected moves before stopping
  PlacementBudget placement;  // final re-solve budget; inner loop runs at 1/10
};

// First-fit-decreasing initial assignment, then single-cluster relocation
// moves accepted only on strict overall-lifetime improvement; stops on budget
// or patience. Per-crossbar placements are memoized by merged-cluster content.
// Deterministic given seed. Supports n_crossbars > cluster count (crossbars
// may stay empty).
MappingSolution hill_climb_map(const Workload& w, const HardwareConfig& hw,
                               const EnduranceMap& maps,
                               const HillClimbParams& params = {},
                               std::uint64_t seed = 0);

// Structural checks on a solution against its workload: every cluster
// assigned exactly once, indices in range, merged clusters fit, placements
// valid. Throws ValidationError.
void validate_solution(const Workload& w, int n_crossbars, int m,
                       const MappingSolution& sol);

// Recomputes the overall lifetime from assign + placements from scratch.
double recompute_lifetime(const MappingSolution& sol, const EnduranceMap& maps);

void write_solution_json(const MappingSolution& sol, const HardwareConfig& hw,
                         const std::filesystem::path& path);

// Rebuilds merged clusters from the workload; placements from the file.
MappingSolution load_solution_json(const std::filesystem::path& path, const Workload& w,
                                   const EnduranceMap& maps);

}  // namespace enduromap
