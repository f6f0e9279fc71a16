#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "enduromap/errors.hpp"
#include "enduromap/rng.hpp"
#include "enduromap/workload.hpp"

using namespace enduromap;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "enduromap_workload_test";
  fs::create_directories(dir);
  return dir;
}

Workload tiny_workload() {
  Workload w;
  Cluster c;
  c.id = 0;
  c.pre = {{1, 2.5}};
  c.post = {2};
  c.synapses = {{1, 2, 0.7, ResistanceState::HRS}};
  w.clusters.push_back(c);
  assign_states(w);
  return w;
}

}  // namespace

TEST_CASE("minimal workload file loads") {
  const fs::path p = scratch_dir() / "minimal.json";
  {
    std::ofstream out(p);
    out << R"({
      "frame_semantics": "image",
      "clusters": [
        {"id": 0,
         "pre": [{"id": 1, "spikes": 2.5}],
         "post": [{"id": 2}],
         "synapses": [{"pre": 1, "post": 2, "weight": 0.7}]}
      ],
      "edges": []
    })";
  }
  const WorkloadFile f = load_workload(p);
  CHECK(f.warnings.empty());
  CHECK(f.workload.clusters.size() == 1);
  CHECK(f.workload.clusters[0].pre.size() == 1);
  CHECK(f.workload.clusters[0].post.size() == 1);
  CHECK(f.workload.clusters[0].synapses.size() == 1);
  CHECK(f.workload.clusters[0].spikes_of(1) == 2.5);
}

TEST_CASE("synapse referencing a missing neuron fails validation") {
  const fs::path p = scratch_dir() / "dangling.json";
  {
    std::ofstream out(p);
    out << R"({"clusters": [
      {"id": 3, "pre": [{"id": 1, "spikes": 1.0}], "post": [{"id": 2}],
       "synapses": [{"pre": 1, "post": 9, "weight": 0.5}]}
    ]})";
  }
  CHECK_THROWS_WITH_AS(load_workload(p), doctest::Contains("cluster 3"), ValidationError);
}

TEST_CASE("malformed json reports a parse error") {
  const fs::path p = scratch_dir() / "broken.json";
  {
    std::ofstream out(p);
    out << "{ \"clusters\": [ }";
  }
  CHECK_THROWS_AS(load_workload(p), ValidationError);
}

TEST_CASE("unknown fields warn but do not fail") {
  const fs::path p = scratch_dir() / "extra.json";
  {
    std::ofstream out(p);
    out << R"({"comment": "hi", "clusters": [
      {"id": 0, "pre": [{"id": 1, "spikes": 1.0}], "post": [{"id": 2}],
       "synapses": [], "notes": "x"}
    ]})";
  }
  const WorkloadFile f = load_workload(p);
  CHECK(f.warnings.size() == 2);
  CHECK(f.warnings[0].find("comment") != std::string::npos);
}

TEST_CASE("save then load is structurally identical") {
  const SyntheticSpec spec{.n_clusters = 4, .pre_per_cluster = 5, .post_per_cluster = 6,
                           .density = 0.6};
  const Workload w = generate_synthetic(spec, 11);
  const fs::path p = scratch_dir() / "roundtrip.json";
  save_workload(w, p);
  const Workload r = load_workload(p).workload;
  CHECK(r == w);

  // and the file bytes themselves are reproducible
  const fs::path q = scratch_dir() / "roundtrip2.json";
  save_workload(r, q);
  std::ifstream a(p), b(q);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("inconsistent shared pre-neuron rates are rejected") {
  Workload w = tiny_workload();
  Cluster c2;
  c2.id = 1;
  c2.pre = {{1, 9.0}};  // same neuron id, different rate
  c2.post = {5};
  w.clusters.push_back(c2);
  CHECK_THROWS_WITH_AS(validate_workload(w), doctest::Contains("inconsistent"),
                       ValidationError);
}

TEST_CASE("spike histogram") {
  SUBCASE("single value occupies one bin") {
    Workload w;
    Cluster c;
    c.id = 0;
    c.pre = {{0, 3.0}, {1, 3.0}};
    c.post = {10, 11};
    c.synapses = {{0, 10, 0.1, ResistanceState::HRS}, {1, 11, 0.2, ResistanceState::HRS}};
    w.clusters.push_back(c);
    assign_states(w);
    const SpikeHistogram h = spike_histogram(w, 8);
    CHECK(h.total_synapses == 2);
    CHECK(h.max_spikes == 3.0);
    std::size_t occupied = 0, total = 0;
    for (std::size_t n : h.counts) {
      if (n) ++occupied;
      total += n;
    }
    CHECK(occupied == 1);
    CHECK(total == 2);
  }
  SUBCASE("empty workload gives an empty histogram") {
    const SpikeHistogram h = spike_histogram(Workload{}, 4);
    CHECK(h.total_synapses == 0);
    CHECK(h.counts.empty());
  }
  SUBCASE("generator max propagates to the histogram") {
    SyntheticSpec spec;
    spec.max_spikes = 6.42;
    const Workload w = generate_synthetic(spec, 7);
    const SpikeHistogram h = spike_histogram(w, 20);
    CHECK(h.max_spikes == 6.42);
  }
  SUBCASE("bin counts sum to the synapse count") {
    const Workload w = generate_synthetic(SyntheticSpec{}, 3);
    const SpikeHistogram h = spike_histogram(w, 13);
    std::size_t total = 0;
    for (std::size_t n : h.counts) total += n;
    CHECK(total == h.total_synapses);
  }
}

TEST_CASE("synthetic generation") {
  SUBCASE("deterministic per seed") {
    const SyntheticSpec spec{.n_clusters = 3, .pre_per_cluster = 4, .post_per_cluster = 4,
                             .density = 0.5};
    CHECK(generate_synthetic(spec, 7) == generate_synthetic(spec, 7));
    CHECK_FALSE(generate_synthetic(spec, 7) == generate_synthetic(spec, 8));
  }
  SUBCASE("density one fills every pair") {
    const SyntheticSpec spec{.n_clusters = 2, .pre_per_cluster = 3, .post_per_cluster = 5,
                             .density = 1.0};
    const Workload w = generate_synthetic(spec, 1);
    for (const Cluster& c : w.clusters) CHECK(c.synapses.size() == 15);
  }
  SUBCASE("synapse count near density expectation") {
    // binomial(256, 0.5) per cluster; 3 sigma = 24
    const SyntheticSpec spec{.n_clusters = 10, .pre_per_cluster = 16, .post_per_cluster = 16,
                             .density = 0.5};
    const Workload w = generate_synthetic(spec, 7);
    for (const Cluster& c : w.clusters) {
      CHECK(c.synapses.size() > 128 - 24);
      CHECK(c.synapses.size() < 128 + 24);
    }
  }
  SUBCASE("validation passes") {
    const Workload w = generate_synthetic(SyntheticSpec{}, 42);
    validate_workload(w);
  }
}

TEST_CASE("weight quantization rule") {
  CHECK(quantize_weight(0.0, 0.0, 1.0) == ResistanceState::HRS);
  CHECK(quantize_weight(0.24, 0.0, 1.0) == ResistanceState::HRS);
  CHECK(quantize_weight(0.26, 0.0, 1.0) == ResistanceState::LRS1);
  CHECK(quantize_weight(0.51, 0.0, 1.0) == ResistanceState::LRS2);
  CHECK(quantize_weight(0.76, 0.0, 1.0) == ResistanceState::LRS3);
  CHECK(quantize_weight(1.0, 0.0, 1.0) == ResistanceState::LRS3);
  // degenerate range
  CHECK(quantize_weight(0.5, 0.5, 0.5) == ResistanceState::LRS3);
  CHECK(quantize_weight(0.0, 0.0, 0.0) == ResistanceState::HRS);

  Workload w = tiny_workload();
  w.clusters[0].synapses[0].weight = -0.9;  // magnitude decides
  w.clusters[0].pre.push_back({3, 1.0});
  w.clusters[0].synapses.push_back({3, 2, 0.05, ResistanceState::HRS});
  w.clusters[0].canonicalize();
  assign_states(w);
  CHECK(w.clusters[0].synapses[0].state == ResistanceState::LRS3);  // |-0.9| is max
  CHECK(w.clusters[0].synapses[1].state == ResistanceState::HRS);

  const QuantizationRule rule{.thresholds = std::array<double, 3>{0.01, 0.5, 2.0}};
  assign_states(w, rule);
  CHECK(w.clusters[0].synapses[0].state == ResistanceState::LRS2);
  CHECK(w.clusters[0].synapses[1].state == ResistanceState::LRS1);
}

TEST_CASE("flat graph partitioning") {
  SUBCASE("fits one crossbar") {
    NeuronGraph g;
    g.neurons = {{0, 1.0}, {1, 2.0}, {2, 0.5}, {3, 0.0}};
    g.edges = {{0, 2, 0.1}, {1, 2, 0.4}, {1, 3, -0.2}};
    const Workload w = partition_flat(g, 8);
    CHECK(w.clusters.size() == 1);
    CHECK(w.clusters[0].pre.size() == 2);
    CHECK(w.clusters[0].post.size() == 2);
    CHECK(w.clusters[0].synapses.size() == 3);
  }
  SUBCASE("chain of 2M neurons needs at least two clusters") {
    const int m = 4;
    NeuronGraph g;
    for (int i = 0; i < 2 * m; ++i) g.neurons.push_back({i, 1.0});
    for (int i = 0; i + 1 < 2 * m; ++i) g.edges.push_back({i, i + 1, 0.3});
    const Workload w = partition_flat(g, m);
    CHECK(w.clusters.size() >= 2);
  }
  SUBCASE("oversized fan-in is infeasible") {
    NeuronGraph g;
    g.neurons.push_back({100, 0.0});
    for (int i = 0; i < 5; ++i) {
      g.neurons.push_back({i, 1.0});
      g.edges.push_back({i, 100, 0.1});
    }
    CHECK_THROWS_AS(partition_flat(g, 4), InfeasibleError);
  }
  SUBCASE("random graph respects size bounds") {
    rng::Stream stream(99);
    NeuronGraph g;
    const int n = 60;
    for (int i = 0; i < n; ++i) g.neurons.push_back({i, stream.uniform(0.0, 5.0)});
    for (int i = 0; i < n; ++i) {
      const int fanout = static_cast<int>(stream.index(5));
      std::set<NeuronId> seen;
      for (int e = 0; e < fanout; ++e) {
        const NeuronId dst = static_cast<NeuronId>(stream.index(n));
        if (dst != i && seen.insert(dst).second) {
          g.edges.push_back({i, dst, stream.normal()});
        }
      }
    }
    const int m = 6;
    const Workload w = partition_flat(g, m);
    validate_workload(w);
    std::size_t synapse_total = 0;
    for (const Cluster& c : w.clusters) {
      CHECK(static_cast<int>(c.pre.size()) <= m);
      CHECK(static_cast<int>(c.post.size()) <= m);
      synapse_total += c.synapses.size();
    }
    CHECK(synapse_total == g.edges.size());
  }
}

TEST_CASE("content hash tracks content, not cluster id") {
  Workload w = tiny_workload();
  Cluster a = w.clusters[0];
  Cluster b = a;
  b.id = 99;
  CHECK(content_hash(a) == content_hash(b));
  b.synapses[0].weight += 0.1;
  CHECK(content_hash(a) != content_hash(b));
}
