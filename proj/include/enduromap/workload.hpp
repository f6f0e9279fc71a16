#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "enduromap/device.hpp"

namespace enduromap {

using NeuronId = std::int64_t;
using ClusterId = std::int64_t;

struct Neuron {
  NeuronId id = 0;
  double spikes_per_frame = 0.0;  // average spikes emitted per inference frame

  friend bool operator==(const Neuron&, const Neuron&) = default;
};

struct Synapse {
  NeuronId pre = 0;
  NeuronId post = 0;
  double weight = 0.0;
  ResistanceState state = ResistanceState::HRS;  // derived from weight

  friend bool operator==(const Synapse&, const Synapse&) = default;
};

// Pre-neurons along crossbar rows, post-neurons along columns. All vectors are
// kept sorted by id so equality is structural and hashing is canonical.
// spikes on a synapse are its pre-neuron's spikes, looked up, never stored.
struct Cluster {
  ClusterId id = 0;
  std::vector<Neuron> pre;
  std::vector<NeuronId> post;
  std::vector<Synapse> synapses;  // sorted by (pre, post), at most one per pair

  double spikes_of(NeuronId pre_id) const;  // throws ValidationError if absent
  const Neuron* find_pre(NeuronId id) const;
  bool has_post(NeuronId id) const;
  void canonicalize();  // sort vectors into canonical order

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

enum class FrameSemantics { Image, Window500ms };
const char* to_string(FrameSemantics f);
FrameSemantics frame_semantics_from_string(const std::string& s);

struct InterClusterEdge {
  ClusterId src = 0;
  ClusterId dst = 0;
  double spikes = 0.0;

  friend bool operator==(const InterClusterEdge&, const InterClusterEdge&) = default;
};

struct Workload {
  FrameSemantics frame_semantics = FrameSemantics::Image;
  std::vector<Cluster> clusters;
  std::vector<InterClusterEdge> edges;  // reporting metadata only

  const Cluster* find_cluster(ClusterId id) const;

  friend bool operator==(const Workload&, const Workload&) = default;
};

// Min-max quantization of |weight| into {HRS, LRS1, LRS2, LRS3} over the whole
// workload; the lowest-magnitude quartile bucket is HRS. Explicit thresholds
// (ascending cut points on |weight|) override the min-max rule.
struct QuantizationRule {
  std::optional<std::array<double, 3>> thresholds;
};

ResistanceState quantize_weight(double abs_weight, double lo, double hi);
void assign_states(Workload& w, const QuantizationRule& rule = {});

// Checks every structural invariant; throws ValidationError naming the
// offending cluster/synapse/neuron.
void validate_workload(const Workload& w);

struct WorkloadFile {
  Workload workload;
  std::vector<std::string> warnings;  // unknown fields are warned about, not fatal
};

WorkloadFile load_workload(const std::filesystem::path& path);
void save_workload(const Workload& w, const std::filesystem::path& path);

struct SpikeHistogram {
  std::vector<double> bin_edges;       // bins+1 edges over [0, max]
  std::vector<std::size_t> counts;     // per-synapse spike rates
  double max_spikes = 0.0;
  std::size_t total_synapses = 0;
};

SpikeHistogram spike_histogram(const Workload& w, int bins);
void write_histogram_csv(const SpikeHistogram& h, const std::filesystem::path& path);

struct SyntheticSpec {
  int n_clusters = 10;
  int pre_per_cluster = 16;
  int post_per_cluster = 16;
  double density = 0.5;             // synapse probability per (pre, post) pair
  double spike_lognorm_mu = 0.0;    // log-space location of per-neuron rates
  double spike_lognorm_sigma = 1.0; // long tail: few critical synapses
  double max_spikes = 6.42;         // rates rescaled so the max equals this
  double weight_mean = 0.0;
  double weight_stddev = 1.0;
  FrameSemantics frame_semantics = FrameSemantics::Image;
};

Workload generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

struct GraphEdge {
  NeuronId pre = 0;
  NeuronId post = 0;
  double weight = 0.0;
};

struct NeuronGraph {
  std::vector<Neuron> neurons;
  std::vector<GraphEdge> edges;
};

// Greedy bin-packing of a flat neuron graph into clusters with |pre| <= m and
// |post| <= m. No optimization claim; plumbing for unclustered inputs.
Workload partition_flat(const NeuronGraph& graph, int m);

// Canonical FNV-1a hash over the cluster's content (ids, spikes, synapses);
// ignores the cluster id so identical merged content hashes identically.
std::uint64_t content_hash(const Cluster& c);

}  // namespace enduromap
