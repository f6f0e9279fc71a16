#include "enduromap/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "enduromap/errors.hpp"
#include "enduromap/parallel.hpp"
#include "enduromap/rng.hpp"

namespace enduromap {

using json = nlohmann::json;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Cluster merge_clusters(const Cluster& a, const Cluster& b) {
  Cluster out;
  out.id = std::min(a.id, b.id);

  std::map<NeuronId, double> pre;
  for (const Neuron& n : a.pre) pre.emplace(n.id, n.spikes_per_frame);
  for (const Neuron& n : b.pre) {
    auto [it, inserted] = pre.emplace(n.id, n.spikes_per_frame);
    if (!inserted && it->second != n.spikes_per_frame) {
      throw ValidationError("merge conflict: pre-neuron " + std::to_string(n.id) +
                            " has different spike rates in clusters " +
                            std::to_string(a.id) + " and " + std::to_string(b.id));
    }
  }
  for (const auto& [nid, spk] : pre) out.pre.push_back({nid, spk});

  std::set<NeuronId> post(a.post.begin(), a.post.end());
  post.insert(b.post.begin(), b.post.end());
  out.post.assign(post.begin(), post.end());

  std::map<std::pair<NeuronId, NeuronId>, Synapse> syn;
  for (const Synapse& s : a.synapses) syn.emplace(std::pair{s.pre, s.post}, s);
  for (const Synapse& s : b.synapses) {
    auto [it, inserted] = syn.emplace(std::pair{s.pre, s.post}, s);
    if (!inserted && (it->second.weight != s.weight || it->second.state != s.state)) {
      throw ValidationError("merge conflict: synapse (" + std::to_string(s.pre) + " -> " +
                            std::to_string(s.post) + ") has different weights in clusters " +
                            std::to_string(a.id) + " and " + std::to_string(b.id));
    }
  }
  for (const auto& [key, s] : syn) out.synapses.push_back(s);
  return out;
}

namespace {

std::optional<Cluster> merge_members(const Workload& w, const std::vector<ClusterId>& ids) {
  std::optional<Cluster> merged;
  for (ClusterId cid : ids) {
    const Cluster* c = w.find_cluster(cid);
    if (!c) throw ValidationError("unknown cluster id " + std::to_string(cid));
    merged = merged ? merge_clusters(*merged, *c) : *c;
  }
  return merged;
}

double overall_lifetime(const std::vector<double>& per_crossbar) {
  double lt = kInf;
  for (double v : per_crossbar) lt = std::min(lt, v);  // empty crossbars hold +inf
  return lt;
}

}  // namespace

MappingSolution map_unlimited(const Workload& w, const EnduranceMap& maps,
                              const PlacementBudget& budget, std::uint64_t seed,
                              int threads) {
  MappingSolution sol;
  const std::size_t n = w.clusters.size();
  sol.per_crossbar.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sol.assign[w.clusters[i].id] = static_cast<int>(i);
  }
  parallel_for(n, [&](std::size_t i) {
    const Cluster& c = w.clusters[i];
    CrossbarSolution& xb = sol.per_crossbar[i];
    xb.clusters = {c.id};
    xb.merged = c;
    xb.placement = optimize_placement(
        c, maps, budget, rng::derive(seed, static_cast<std::uint64_t>(c.id)));
  }, threads);

  sol.lifetime = kInf;
  for (const CrossbarSolution& xb : sol.per_crossbar) {
    sol.lifetime = std::min(sol.lifetime, xb.placement->lifetime);
  }
  return sol;
}

namespace {

struct HillState {
  std::vector<std::vector<ClusterId>> members;  // per crossbar, ascending
  std::vector<double> lifetime;                 // per crossbar, +inf if empty
};

struct PlacementCache {
  std::unordered_map<std::uint64_t, double> lifetime;
};

// merged pre/post sizes of members + candidate; counts unions of neuron ids
bool fits(const Workload& w, const std::vector<ClusterId>& members, ClusterId extra, int m) {
  std::set<NeuronId> pre, post;
  auto add = [&](const Cluster& c) {
    for (const Neuron& n : c.pre) pre.insert(n.id);
    for (NeuronId n : c.post) post.insert(n);
  };
  for (ClusterId cid : members) add(*w.find_cluster(cid));
  add(*w.find_cluster(extra));
  return static_cast<int>(pre.size()) <= m && static_cast<int>(post.size()) <= m;
}

double solve_crossbar(const Workload& w, const std::vector<ClusterId>& members,
                      const EnduranceMap& maps, const PlacementBudget& budget,
                      std::uint64_t seed, PlacementCache& cache) {
  if (members.empty()) return kInf;
  const std::optional<Cluster> merged = merge_members(w, members);
  const std::uint64_t key = content_hash(*merged) ^
                            rng::splitmix64(static_cast<std::uint64_t>(budget.iterations));
  if (auto it = cache.lifetime.find(key); it != cache.lifetime.end()) return it->second;
  const PlacementResult r =
      optimize_placement(*merged, maps, budget, rng::derive(seed, content_hash(*merged)));
  cache.lifetime.emplace(key, r.lifetime);
  return r.lifetime;
}

}  // namespace

MappingSolution hill_climb_map(const Workload& w, const HardwareConfig& hw,
                               const EnduranceMap& maps, const HillClimbParams& params,
                               std::uint64_t seed) {
  if (hw.n_crossbars < 1) throw ConfigError("hardware must have at least one crossbar");
  const int m = maps.m;
  const int nh = hw.n_crossbars;
  const std::size_t nc = w.clusters.size();

  // first-fit-decreasing by |pre| + |post|
  std::vector<const Cluster*> order;
  for (const Cluster& c : w.clusters) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](const Cluster* a, const Cluster* b) {
    const auto sa = a->pre.size() + a->post.size();
    const auto sb = b->pre.size() + b->post.size();
    if (sa != sb) return sa > sb;
    return a->id < b->id;
  });

  HillState st;
  st.members.resize(nh);
  for (const Cluster* c : order) {
    bool placed = false;
    for (int xb = 0; xb < nh && !placed; ++xb) {
      if (fits(w, st.members[xb], c->id, m)) {
        st.members[xb].push_back(c->id);
        std::sort(st.members[xb].begin(), st.members[xb].end());
        placed = true;
      }
    }
    if (!placed) {
      throw InfeasibleError("no feasible initial assignment: cluster " +
                            std::to_string(c->id) + " (" + std::to_string(c->pre.size()) +
                            " pre, " + std::to_string(c->post.size()) +
                            " post neurons) fits no crossbar");
    }
  }

  PlacementBudget inner = params.placement;
  inner.iterations = std::max<long>(params.placement.iterations / 10, 10);

  PlacementCache cache;
  st.lifetime.assign(nh, kInf);
  for (int xb = 0; xb < nh; ++xb) {
    st.lifetime[xb] = solve_crossbar(w, st.members[xb], maps, inner, seed, cache);
  }
  double current = overall_lifetime(st.lifetime);

  MappingSolution sol;
  sol.search_stats.accepted_trace.push_back(current);

  rng::Stream stream(rng::derive(seed, 0x9111c11abULL));
  long rejected_streak = 0;
  if (nc >= 1 && nh >= 2) {
    while (sol.search_stats.evaluated < params.budget && rejected_streak < params.patience) {
      const auto& mover = w.clusters[stream.index(nc)];
      int src = 0;
      for (int xb = 0; xb < nh; ++xb) {
        if (std::binary_search(st.members[xb].begin(), st.members[xb].end(), mover.id)) {
          src = xb;
          break;
        }
      }
      int dst = static_cast<int>(stream.index(nh - 1));
      if (dst >= src) ++dst;
      ++sol.search_stats.evaluated;

      if (!fits(w, st.members[dst], mover.id, m)) {
        ++rejected_streak;
        continue;
      }

      std::vector<ClusterId> new_src = st.members[src];
      new_src.erase(std::find(new_src.begin(), new_src.end(), mover.id));
      std::vector<ClusterId> new_dst = st.members[dst];
      new_dst.insert(std::upper_bound(new_dst.begin(), new_dst.end(), mover.id), mover.id);

      const double lt_src = solve_crossbar(w, new_src, maps, inner, seed, cache);
      const double lt_dst = solve_crossbar(w, new_dst, maps, inner, seed, cache);

      double candidate = kInf;
      for (int xb = 0; xb < nh; ++xb) {
        const double v = xb == src ? lt_src : (xb == dst ? lt_dst : st.lifetime[xb]);
        candidate = std::min(candidate, v);
      }

      if (candidate > current) {
        st.members[src] = std::move(new_src);
        st.members[dst] = std::move(new_dst);
        st.lifetime[src] = lt_src;
        st.lifetime[dst] = lt_dst;
        current = candidate;
        ++sol.search_stats.accepted;
        sol.search_stats.accepted_trace.push_back(current);
        rejected_streak = 0;
      } else {
        ++rejected_streak;
      }
    }
  }

  // final full-budget re-solve of the winning assignment
  sol.per_crossbar.resize(nh);
  for (int xb = 0; xb < nh; ++xb) {
    CrossbarSolution& out = sol.per_crossbar[xb];
    out.clusters = st.members[xb];
    for (ClusterId cid : out.clusters) sol.assign[cid] = xb;
    if (out.clusters.empty()) continue;
    out.merged = merge_members(w, out.clusters);
    out.placement = optimize_placement(*out.merged, maps, params.placement,
                                       rng::derive(seed, content_hash(*out.merged)));
  }
  sol.lifetime = kInf;
  for (const CrossbarSolution& xb : sol.per_crossbar) {
    if (xb.placement) sol.lifetime = std::min(sol.lifetime, xb.placement->lifetime);
  }
  return sol;
}

void validate_solution(const Workload& w, int n_crossbars, int m,
                       const MappingSolution& sol) {
  std::set<ClusterId> seen;
  for (const auto& [cid, xb] : sol.assign) {
    if (!w.find_cluster(cid)) {
      throw ValidationError("solution assigns unknown cluster " + std::to_string(cid));
    }
    if (xb < 0 || xb >= n_crossbars) {
      throw ValidationError("solution assigns cluster " + std::to_string(cid) +
                            " to out-of-range crossbar " + std::to_string(xb));
    }
    seen.insert(cid);
  }
  for (const Cluster& c : w.clusters) {
    if (!seen.count(c.id)) {
      throw ValidationError("solution does not assign cluster " + std::to_string(c.id));
    }
  }
  if (static_cast<int>(sol.per_crossbar.size()) > n_crossbars) {
    throw ValidationError("solution has more per-crossbar entries than crossbars");
  }
  std::set<ClusterId> membered;
  for (std::size_t xb = 0; xb < sol.per_crossbar.size(); ++xb) {
    const CrossbarSolution& cs = sol.per_crossbar[xb];
    for (ClusterId cid : cs.clusters) {
      auto it = sol.assign.find(cid);
      if (it == sol.assign.end() || it->second != static_cast<int>(xb)) {
        throw ValidationError("crossbar member list disagrees with assignment for cluster " +
                              std::to_string(cid));
      }
      if (!membered.insert(cid).second) {
        throw ValidationError("cluster " + std::to_string(cid) +
                              " appears on more than one crossbar");
      }
    }
    if (cs.clusters.empty()) continue;
    if (!cs.merged || !cs.placement) {
      throw ValidationError("non-empty crossbar " + std::to_string(xb) +
                            " lacks merged cluster or placement");
    }
    if (static_cast<int>(cs.merged->pre.size()) > m ||
        static_cast<int>(cs.merged->post.size()) > m) {
      throw ValidationError("crossbar " + std::to_string(xb) + " exceeds size bounds");
    }
    validate_placement(*cs.merged, cs.placement->placement, m);
  }
  if (membered.size() != w.clusters.size()) {
    throw ValidationError("per-crossbar member lists do not cover every cluster");
  }
}

double recompute_lifetime(const MappingSolution& sol, const EnduranceMap& maps) {
  double lt = kInf;
  for (const CrossbarSolution& xb : sol.per_crossbar) {
    if (!xb.merged || !xb.placement) continue;
    lt = std::min(lt, lifetime_of_placement(*xb.merged, xb.placement->placement, maps).lifetime);
  }
  return lt;
}

namespace {

json placement_to_json(const Placement& p) {
  json rows = json::object(), cols = json::object();
  for (const auto& [nid, r] : p.row_of) rows[std::to_string(nid)] = r;
  for (const auto& [nid, c] : p.col_of) cols[std::to_string(nid)] = c;
  return {{"rows", std::move(rows)}, {"cols", std::move(cols)}};
}

json lifetime_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_solution_json(const MappingSolution& sol, const HardwareConfig& hw,
                         const std::filesystem::path& path) {
  json j;
  j["hardware"] = {{"n_crossbars", hw.n_crossbars},
                   {"crossbar",
                    {{"size", hw.crossbar.size},
                     {"technology_nm", hw.crossbar.tech.node_nm},
                     {"temperature_c", hw.crossbar.temperature_c},
                     {"drive_voltage_v", hw.crossbar.drive_voltage}}}};
  json assign = json::object();
  for (const auto& [cid, xb] : sol.assign) assign[std::to_string(cid)] = xb;
  j["assign"] = std::move(assign);

  json per = json::array();
  for (std::size_t xb = 0; xb < sol.per_crossbar.size(); ++xb) {
    const CrossbarSolution& cs = sol.per_crossbar[xb];
    json e;
    e["crossbar"] = xb;
    e["clusters"] = cs.clusters;
    if (cs.placement) {
      e["lifetime"] = lifetime_to_json(cs.placement->lifetime);
      if (cs.placement->limiting_synapse) {
        e["limiting_synapse"] = {{"pre", cs.placement->limiting_synapse->first},
                                 {"post", cs.placement->limiting_synapse->second}};
      } else {
        e["limiting_synapse"] = nullptr;
      }
      e["placement"] = placement_to_json(cs.placement->placement);
    } else {
      e["lifetime"] = nullptr;
      e["limiting_synapse"] = nullptr;
      e["placement"] = nullptr;
    }
    per.push_back(std::move(e));
  }
  j["per_crossbar"] = std::move(per);
  j["overall_lifetime"] = lifetime_to_json(sol.lifetime);
  // wall time stays on the console; files must be byte-identical across runs
  j["search_stats"] = {{"evaluated", sol.search_stats.evaluated},
                       {"accepted", sol.search_stats.accepted}};

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write solution file: " + path.string());
  out << j.dump(2) << '\n';
}

MappingSolution load_solution_json(const std::filesystem::path& path, const Workload& w,
                                   const EnduranceMap& maps) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open solution file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("solution file " + path.string() + ": " + e.what());
  }

  MappingSolution sol;
  try {
    for (const auto& [key, val] : j.at("assign").items()) {
      const ClusterId cid = std::stoll(key);
      if (sol.assign.count(cid)) {
        throw ValidationError("solution assigns cluster " + key + " twice");
      }
      sol.assign[cid] = val.get<int>();
    }
    for (const json& e : j.at("per_crossbar")) {
      CrossbarSolution cs;
      for (const json& cid : e.at("clusters")) cs.clusters.push_back(cid.get<ClusterId>());
      std::sort(cs.clusters.begin(), cs.clusters.end());
      if (cs.clusters.size() !=
          std::set<ClusterId>(cs.clusters.begin(), cs.clusters.end()).size()) {
        throw ValidationError("solution lists a cluster twice on crossbar " +
                              std::to_string(sol.per_crossbar.size()));
      }
      if (!cs.clusters.empty()) {
        cs.merged = merge_members(w, cs.clusters);
        PlacementResult pr;
        const json& jp = e.at("placement");
        for (const auto& [key, val] : jp.at("rows").items()) {
          pr.placement.row_of[std::stoll(key)] = val.get<int>();
        }
        for (const auto& [key, val] : jp.at("cols").items()) {
          pr.placement.col_of[std::stoll(key)] = val.get<int>();
        }
        const LifetimeEval ev = lifetime_of_placement(*cs.merged, pr.placement, maps);
        pr.lifetime = ev.lifetime;
        pr.limiting_synapse = ev.limiting;
        cs.placement = std::move(pr);
      }
      sol.per_crossbar.push_back(std::move(cs));
    }
  } catch (const json::exception& e) {
    throw ValidationError("solution file " + path.string() + ": " + e.what());
  }

  sol.lifetime = kInf;
  for (const CrossbarSolution& xb : sol.per_crossbar) {
    if (xb.placement) sol.lifetime = std::min(sol.lifetime, xb.placement->lifetime);
  }
  return sol;
}

}  // namespace enduromap
