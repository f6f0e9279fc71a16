#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "enduromap/errors.hpp"
#include "enduromap/mapping.hpp"
#include "enduromap/rng.hpp"

using namespace enduromap;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

EnduranceMap random_map(int m, std::uint64_t seed) {
  rng::Stream stream(seed);
  EnduranceMap e;
  e.m = m;
  e.lrs = Grid::Zero(m, m);
  e.hrs = Grid::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) {
      e.lrs(k, l) = stream.uniform(100.0, 5000.0);
      e.hrs(k, l) = e.lrs(k, l) * stream.uniform(0.3, 0.8);
    }
  }
  return e;
}

Cluster simple_cluster(ClusterId id, NeuronId base, int p, int q, double spikes) {
  Cluster c;
  c.id = id;
  for (int i = 0; i < p; ++i) c.pre.push_back({base + i, spikes});
  for (int j = 0; j < q; ++j) c.post.push_back(base + 100 + j);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < q; ++j) {
      c.synapses.push_back({base + i, base + 100 + j, 0.4, ResistanceState::LRS1});
    }
  }
  return c;
}

Workload synthetic(int n_clusters, int size, std::uint64_t seed, double density = 0.7) {
  SyntheticSpec spec;
  spec.n_clusters = n_clusters;
  spec.pre_per_cluster = size;
  spec.post_per_cluster = size;
  spec.density = density;
  return generate_synthetic(spec, seed);
}

}  // namespace

TEST_CASE("merge clusters") {
  SUBCASE("disjoint union") {
    const Cluster a = simple_cluster(0, 0, 2, 3, 1.0);
    const Cluster b = simple_cluster(1, 1000, 4, 1, 2.0);
    const Cluster m = merge_clusters(a, b);
    CHECK(m.pre.size() == 6);
    CHECK(m.post.size() == 4);
    CHECK(m.synapses.size() == a.synapses.size() + b.synapses.size());
  }
  SUBCASE("self merge is the identity") {
    const Cluster a = simple_cluster(3, 0, 2, 2, 1.5);
    const Cluster m = merge_clusters(a, a);
    CHECK(m == a);
  }
  SUBCASE("commutative") {
    const Cluster a = simple_cluster(0, 0, 2, 3, 1.0);
    const Cluster b = simple_cluster(1, 50, 3, 2, 2.0);
    Cluster ab = merge_clusters(a, b);
    Cluster ba = merge_clusters(b, a);
    ab.id = ba.id = 0;
    CHECK(ab == ba);
  }
  SUBCASE("associative up to structural equality") {
    const Cluster a = simple_cluster(0, 0, 2, 2, 1.0);
    const Cluster b = simple_cluster(1, 20, 2, 2, 2.0);
    const Cluster c = simple_cluster(2, 40, 2, 2, 3.0);
    Cluster left = merge_clusters(merge_clusters(a, b), c);
    Cluster right = merge_clusters(a, merge_clusters(b, c));
    CHECK(left == right);
  }
  SUBCASE("shared neurons deduplicate") {
    Cluster a = simple_cluster(0, 0, 2, 2, 1.0);
    Cluster b = simple_cluster(1, 0, 2, 2, 1.0);  // same neuron ids and rates
    b.synapses.clear();
    b.synapses.push_back({0, 101, 0.9, ResistanceState::LRS2});  // new pair only
    Cluster a2 = a;
    a2.synapses.erase(
        std::remove_if(a2.synapses.begin(), a2.synapses.end(),
                       [](const Synapse& s) { return s.pre == 0 && s.post == 101; }),
        a2.synapses.end());
    const Cluster m = merge_clusters(a2, b);
    CHECK(m.pre.size() == 2);
    CHECK(m.post.size() == 2);
    CHECK(m.synapses.size() == 4);
  }
  SUBCASE("conflicting duplicate synapse is an error") {
    const Cluster a = simple_cluster(0, 0, 2, 2, 1.0);
    Cluster b = a;
    b.id = 1;
    b.synapses[0].weight += 1.0;
    CHECK_THROWS_WITH_AS(merge_clusters(a, b), doctest::Contains("merge conflict"),
                         ValidationError);
  }
  SUBCASE("conflicting shared pre-neuron rate is an error") {
    const Cluster a = simple_cluster(0, 0, 2, 2, 1.0);
    Cluster b = simple_cluster(1, 0, 2, 2, 2.0);  // same ids, different rate
    CHECK_THROWS_AS(merge_clusters(a, b), ValidationError);
  }
}

TEST_CASE("unlimited mapping") {
  const EnduranceMap maps = random_map(8, 77);

  SUBCASE("single cluster") {
    Workload w;
    w.clusters.push_back(simple_cluster(0, 0, 3, 3, 2.0));
    const MappingSolution sol = map_unlimited(w, maps, {500, 3}, 7);
    CHECK(sol.per_crossbar.size() == 1);
    CHECK(sol.lifetime == sol.per_crossbar[0].placement->lifetime);
    validate_solution(w, 1, maps.m, sol);
  }

  SUBCASE("overall lifetime is the minimum over clusters") {
    Workload w;
    w.clusters.push_back(simple_cluster(0, 0, 2, 2, 1.0));    // long-lived
    w.clusters.push_back(simple_cluster(1, 500, 2, 2, 50.0)); // spike-heavy
    const MappingSolution sol = map_unlimited(w, maps, {500, 3}, 7);
    const double a = sol.per_crossbar[0].placement->lifetime;
    const double b = sol.per_crossbar[1].placement->lifetime;
    CHECK(sol.lifetime == std::min(a, b));
    CHECK(b < a);
  }

  SUBCASE("recomputation reproduces the reported lifetime") {
    const Workload w = synthetic(10, 6, 7);
    const MappingSolution sol = map_unlimited(w, maps, {400, 2}, 7);
    CHECK(recompute_lifetime(sol, maps) == sol.lifetime);
    validate_solution(w, static_cast<int>(w.clusters.size()), maps.m, sol);
  }

  SUBCASE("oversized cluster is infeasible") {
    Workload w;
    w.clusters.push_back(simple_cluster(4, 0, 9, 2, 1.0));  // 9 > m = 8
    CHECK_THROWS_WITH_AS(map_unlimited(w, maps, {100, 1}, 0), doctest::Contains("4"),
                         InfeasibleError);
  }

  SUBCASE("thread count does not change the result") {
    const Workload w = synthetic(6, 5, 3);
    const MappingSolution a = map_unlimited(w, maps, {300, 2}, 5, 1);
    const MappingSolution b = map_unlimited(w, maps, {300, 2}, 5, 4);
    CHECK(a.lifetime == b.lifetime);
    CHECK(a.assign == b.assign);
  }
}

TEST_CASE("hill climbing") {
  const EnduranceMap maps = random_map(8, 99);

  SUBCASE("budget zero returns the first-fit-decreasing initial solution") {
    const Workload w = synthetic(4, 3, 11);
    HardwareConfig hw;
    hw.n_crossbars = 4;
    HillClimbParams params;
    params.budget = 0;
    const MappingSolution sol = hill_climb_map(w, hw, maps, params, 7);
    CHECK(sol.search_stats.evaluated == 0);
    CHECK(sol.search_stats.accepted == 0);
    validate_solution(w, hw.n_crossbars, maps.m, sol);
    // FFD packs greedily: with 3+3 neurons per side fitting 8, the first two
    // clusters share crossbar 0
    CHECK(sol.per_crossbar[0].clusters.size() >= 2);
  }

  SUBCASE("two clusters on one crossbar are force-merged") {
    Workload w;
    w.clusters.push_back(simple_cluster(0, 0, 2, 2, 1.0));
    w.clusters.push_back(simple_cluster(1, 100, 2, 2, 4.0));
    HardwareConfig hw;
    hw.n_crossbars = 1;
    const MappingSolution sol = hill_climb_map(w, hw, maps, {}, 7);
    CHECK(sol.per_crossbar.size() == 1);
    CHECK(sol.per_crossbar[0].clusters.size() == 2);
    const Cluster merged = merge_clusters(w.clusters[0], w.clusters[1]);
    CHECK(*sol.per_crossbar[0].merged == merged);
    CHECK(sol.lifetime == sol.per_crossbar[0].placement->lifetime);
  }

  SUBCASE("accepted trace is strictly increasing and final beats initial") {
    const Workload w = synthetic(8, 4, 21);
    HardwareConfig hw;
    hw.n_crossbars = 6;
    HillClimbParams params;
    params.budget = 400;
    params.patience = 100;
    const MappingSolution sol = hill_climb_map(w, hw, maps, params, 3);
    REQUIRE(!sol.search_stats.accepted_trace.empty());
    for (std::size_t i = 1; i < sol.search_stats.accepted_trace.size(); ++i) {
      CHECK(sol.search_stats.accepted_trace[i] > sol.search_stats.accepted_trace[i - 1]);
    }
    CHECK(sol.lifetime >= sol.search_stats.accepted_trace.front());
    CHECK(recompute_lifetime(sol, maps) == sol.lifetime);
    validate_solution(w, hw.n_crossbars, maps.m, sol);
  }

  SUBCASE("more crossbars than clusters leaves crossbars empty") {
    const Workload w = synthetic(3, 4, 5);
    HardwareConfig hw;
    hw.n_crossbars = 6;
    const MappingSolution sol = hill_climb_map(w, hw, maps, {}, 7);
    validate_solution(w, hw.n_crossbars, maps.m, sol);
    int used = 0;
    for (const auto& xb : sol.per_crossbar) {
      if (!xb.clusters.empty()) ++used;
    }
    CHECK(used <= 3);
    CHECK(std::isfinite(sol.lifetime));
  }

  SUBCASE("infeasible initial assignment names the blocking cluster") {
    Workload w;
    w.clusters.push_back(simple_cluster(0, 0, 6, 6, 1.0));
    w.clusters.push_back(simple_cluster(1, 100, 6, 6, 1.0));
    HardwareConfig hw;
    hw.n_crossbars = 1;  // merged 12 pre-neurons cannot fit m = 8
    CHECK_THROWS_AS(hill_climb_map(w, hw, maps, {}, 0), InfeasibleError);
  }

  SUBCASE("deterministic per seed") {
    const Workload w = synthetic(6, 4, 9);
    HardwareConfig hw;
    hw.n_crossbars = 3;
    HillClimbParams params;
    params.budget = 200;
    const MappingSolution a = hill_climb_map(w, hw, maps, params, 13);
    const MappingSolution b = hill_climb_map(w, hw, maps, params, 13);
    CHECK(a.assign == b.assign);
    CHECK(a.lifetime == b.lifetime);
    CHECK(a.search_stats.evaluated == b.search_stats.evaluated);
  }
}

TEST_CASE("solution export and reload") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "enduromap_mapping_test";
  fs::create_directories(dir);

  const EnduranceMap maps = random_map(8, 55);
  const Workload w = synthetic(5, 4, 17);
  HardwareConfig hw;
  hw.n_crossbars = 3;
  hw.crossbar.size = 8;
  const MappingSolution sol = hill_climb_map(w, hw, maps, {}, 7);

  write_solution_json(sol, hw, dir / "a.json");
  write_solution_json(sol, hw, dir / "b.json");
  std::ifstream fa(dir / "a.json"), fb(dir / "b.json");
  const std::string sa((std::istreambuf_iterator<char>(fa)), {});
  const std::string sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
  CHECK(sa.find("wall_time") == std::string::npos);

  const MappingSolution re = load_solution_json(dir / "a.json", w, maps);
  CHECK(re.assign == sol.assign);
  CHECK(re.lifetime == sol.lifetime);
  validate_solution(w, hw.n_crossbars, maps.m, re);

  // tampering: the same cluster listed on two crossbars
  MappingSolution tampered = re;
  REQUIRE(tampered.per_crossbar.size() >= 2);
  REQUIRE(!tampered.per_crossbar[0].clusters.empty());
  tampered.per_crossbar[1].clusters.push_back(tampered.per_crossbar[0].clusters[0]);
  CHECK_THROWS_AS(validate_solution(w, hw.n_crossbars, maps.m, tampered), ValidationError);
  fs::remove_all(dir);
}
