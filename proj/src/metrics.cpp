#include "enduromap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "enduromap/errors.hpp"
#include "enduromap/parallel.hpp"
#include "enduromap/rng.hpp"

namespace enduromap {

using json = nlohmann::json;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double synapse_delay(const Placement& p, const Synapse& s, const DelayMap& d) {
  const auto row = p.row_of.find(s.pre);
  const auto col = p.col_of.find(s.post);
  if (row == p.row_of.end() || col == p.col_of.end()) {
    throw ValidationError("synapse_delay: synapse (" + std::to_string(s.pre) + " -> " +
                          std::to_string(s.post) + ") is not mapped");
  }
  return d.ms(row->second, col->second);
}

double cluster_delay(const Cluster& c, const Placement& p, const DelayMap& d) {
  if (c.synapses.empty()) return 0.0;
  double weighted = 0.0, weight = 0.0, flat = 0.0;
  for (const Synapse& s : c.synapses) {
    const double spk = c.spikes_of(s.pre);
    const double delay = synapse_delay(p, s, d);
    weighted += spk * delay;
    weight += spk;
    flat += delay;
  }
  if (weight == 0.0) return flat / static_cast<double>(c.synapses.size());
  return weighted / weight;
}

double hardware_delay(const MappingSolution& sol, const DelayMap& d) {
  double weighted = 0.0, weight = 0.0;
  double flat_sum = 0.0;
  long groups = 0;
  for (const CrossbarSolution& xb : sol.per_crossbar) {
    if (!xb.merged || !xb.placement) continue;
    const Cluster& c = *xb.merged;
    if (c.synapses.empty()) continue;
    double total_spikes = 0.0;
    for (const Synapse& s : c.synapses) total_spikes += c.spikes_of(s.pre);
    const double delay = cluster_delay(c, xb.placement->placement, d);
    weighted += total_spikes * delay;
    weight += total_spikes;
    flat_sum += delay;
    ++groups;
  }
  if (groups == 0) return 0.0;
  if (weight == 0.0) return flat_sum / static_cast<double>(groups);
  return weighted / weight;
}

double average_rram_voltage(const MappingSolution& sol, const Grid& hrs_volts,
                            const Grid& lrs_volts) {
  double sum = 0.0;
  long cells = 0;
  for (const CrossbarSolution& xb : sol.per_crossbar) {
    if (!xb.merged || !xb.placement) continue;
    const Placement& p = xb.placement->placement;
    for (const Synapse& s : xb.merged->synapses) {
      const Grid& v = is_lrs(s.state) ? lrs_volts : hrs_volts;
      sum += v(p.row_of.at(s.pre), p.col_of.at(s.post));
      ++cells;
    }
  }
  return cells ? sum / static_cast<double>(cells) : 0.0;
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw ConfigError("quartiles of an empty sample");
  std::sort(values.begin(), values.end());
  auto median_of = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
    const std::size_t n = hi - lo;
    return n % 2 ? values[lo + n / 2]
                 : 0.5 * (values[lo + n / 2 - 1] + values[lo + n / 2]);
  };
  const std::size_t n = values.size();
  Quartiles q;
  q.median = median_of(0, n);
  if (n == 1) {
    q.q1 = q.q3 = q.median;
    return q;
  }
  q.q1 = median_of(0, n / 2);
  q.q3 = median_of(n % 2 ? n / 2 + 1 : n / 2, n);
  return q;
}

BaselineDistribution random_baseline(const Workload& w, const HardwareConfig& hw,
                                     const CellMaps& maps, int n_seeds,
                                     std::uint64_t seed, int threads) {
  if (n_seeds < 1) throw ConfigError("random_baseline: n_seeds must be >= 1");
  if (hw.n_crossbars < 1) throw ConfigError("random_baseline: need at least one crossbar");
  const int m = maps.cfg.size;

  // round-robin assignment, shared by every sample
  std::vector<std::vector<ClusterId>> members(hw.n_crossbars);
  for (std::size_t i = 0; i < w.clusters.size(); ++i) {
    members[i % hw.n_crossbars].push_back(w.clusters[i].id);
  }
  std::vector<std::optional<Cluster>> merged(hw.n_crossbars);
  for (int xb = 0; xb < hw.n_crossbars; ++xb) {
    std::optional<Cluster> acc;
    for (ClusterId cid : members[xb]) {
      const Cluster* c = w.find_cluster(cid);
      acc = acc ? merge_clusters(*acc, *c) : *c;
    }
    if (acc && (static_cast<int>(acc->pre.size()) > m ||
                static_cast<int>(acc->post.size()) > m)) {
      throw InfeasibleError("random_baseline: round-robin merge on crossbar " +
                            std::to_string(xb) + " exceeds " + std::to_string(m) + "x" +
                            std::to_string(m));
    }
    merged[xb] = std::move(acc);
  }

  BaselineDistribution out;
  out.samples.resize(n_seeds);
  parallel_for(static_cast<std::size_t>(n_seeds), [&](std::size_t i) {
    rng::Stream stream(rng::derive(seed, i));
    MappingSolution sol;
    sol.per_crossbar.resize(hw.n_crossbars);
    for (int xb = 0; xb < hw.n_crossbars; ++xb) {
      if (!merged[xb]) continue;
      CrossbarSolution& cs = sol.per_crossbar[xb];
      cs.clusters = members[xb];
      cs.merged = merged[xb];
      PlacementResult pr;
      pr.placement = random_placement(*merged[xb], m, stream);
      const LifetimeEval ev = lifetime_of_placement(*merged[xb], pr.placement, maps.endurance);
      pr.lifetime = ev.lifetime;
      pr.limiting_synapse = ev.limiting;
      cs.placement = std::move(pr);
    }
    double lt = kInf;
    for (const CrossbarSolution& cs : sol.per_crossbar) {
      if (cs.placement) lt = std::min(lt, cs.placement->lifetime);
    }
    out.samples[i] = {lt, hardware_delay(sol, maps.delay),
                      average_rram_voltage(sol, maps.hrs_volts.volts, maps.lrs_volts.volts)};
  }, threads);

  std::vector<double> lts, dls, vs;
  for (const MetricSample& s : out.samples) {
    lts.push_back(s.lifetime);
    dls.push_back(s.delay_ms);
    vs.push_back(s.voltage);
  }
  out.lifetime = quartiles(lts);
  out.delay_ms = quartiles(dls);
  out.voltage = quartiles(vs);
  return out;
}

namespace {

double ratio_of(double value, double reference) {
  if (!std::isfinite(value) && !std::isfinite(reference)) return 1.0;
  return value / reference;
}

const Placement& placement_for(const MappingSolution& sol, ClusterId cid) {
  const auto it = sol.assign.find(cid);
  if (it == sol.assign.end() ||
      it->second >= static_cast<int>(sol.per_crossbar.size()) ||
      !sol.per_crossbar[it->second].placement) {
    throw ValidationError("solution lacks a placement for cluster " + std::to_string(cid));
  }
  return sol.per_crossbar[it->second].placement->placement;
}

}  // namespace

EvaluationReport evaluate(const Workload& w, const MappingSolution& sol,
                          const CellMaps& maps,
                          std::optional<BaselineDistribution> baseline) {
  EvaluationReport r;
  r.overall_lifetime = recompute_lifetime(sol, maps.endurance);

  for (const Cluster& c : w.clusters) {
    const Placement& p = placement_for(sol, c.id);
    double lt = kInf;
    double total_spikes = 0.0;
    for (const Synapse& s : c.synapses) {
      const double spk = c.spikes_of(s.pre);
      total_spikes += spk;
      lt = std::min(lt, synapse_lifetime(s.state, spk, p.row_of.at(s.pre),
                                         p.col_of.at(s.post), maps.endurance));
    }
    if (!c.synapses.empty() && total_spikes == 0.0) r.zero_spike_delay_fallback = true;
    r.per_cluster_lifetimes.emplace_back(c.id, lt);
    r.per_cluster_delays_ms.emplace_back(c.id, cluster_delay(c, p, maps.delay));
  }

  // flat spike-weighted mean over original clusters; identical to the merged
  // hierarchy since weighted means compose
  double weighted = 0.0, weight = 0.0, flat = 0.0;
  long groups = 0;
  for (const Cluster& c : w.clusters) {
    if (c.synapses.empty()) continue;
    double total = 0.0;
    for (const Synapse& s : c.synapses) total += c.spikes_of(s.pre);
    const double delay = cluster_delay(c, placement_for(sol, c.id), maps.delay);
    weighted += total * delay;
    weight += total;
    flat += delay;
    ++groups;
  }
  if (groups == 0) {
    r.hardware_delay_ms = 0.0;
  } else if (weight == 0.0) {
    r.hardware_delay_ms = flat / static_cast<double>(groups);
    r.zero_spike_delay_fallback = true;
  } else {
    r.hardware_delay_ms = weighted / weight;
  }

  r.avg_rram_voltage =
      average_rram_voltage(sol, maps.hrs_volts.volts, maps.lrs_volts.volts);

  if (baseline) {
    r.lifetime_ratio = ratio_of(r.overall_lifetime, baseline->lifetime.median);
    r.delay_ratio = ratio_of(r.hardware_delay_ms, baseline->delay_ms.median);
    r.voltage_ratio = ratio_of(r.avg_rram_voltage, baseline->voltage.median);
    r.baseline = std::move(baseline);
  }
  return r;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json quartiles_json(const Quartiles& q) {
  return {{"q1", finite_or_null(q.q1)},
          {"median", finite_or_null(q.median)},
          {"q3", finite_or_null(q.q3)}};
}

std::string csv_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

}  // namespace

void write_report_json(const EvaluationReport& r, const std::filesystem::path& path) {
  json j;
  j["overall_lifetime"] = finite_or_null(r.overall_lifetime);
  json jlt = json::object(), jdl = json::object();
  for (const auto& [cid, v] : r.per_cluster_lifetimes) jlt[std::to_string(cid)] = finite_or_null(v);
  for (const auto& [cid, v] : r.per_cluster_delays_ms) jdl[std::to_string(cid)] = v;
  j["per_cluster_lifetimes"] = std::move(jlt);
  j["per_cluster_delays_ms"] = std::move(jdl);
  j["hardware_delay_ms"] = r.hardware_delay_ms;
  j["avg_rram_voltage"] = r.avg_rram_voltage;
  j["zero_spike_delay_fallback"] = r.zero_spike_delay_fallback;
  if (r.baseline) {
    j["baseline"] = {{"n_samples", r.baseline->samples.size()},
                     {"lifetime", quartiles_json(r.baseline->lifetime)},
                     {"delay_ms", quartiles_json(r.baseline->delay_ms)},
                     {"voltage", quartiles_json(r.baseline->voltage)}};
    j["ratios"] = {{"lifetime", finite_or_null(*r.lifetime_ratio)},
                   {"delay_ms", finite_or_null(*r.delay_ratio)},
                   {"voltage", finite_or_null(*r.voltage_ratio)}};
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report file: " + path.string());
  out << j.dump(2) << '\n';
}

void write_report_csv(const EvaluationReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report file: " + path.string());
  out << "metric,value,baseline_median,ratio\n";
  auto row = [&](const char* name, double value, const Quartiles* q,
                 const std::optional<double>& ratio) {
    out << name << ',' << csv_value(value) << ',';
    if (q) out << csv_value(q->median);
    out << ',';
    if (ratio) out << csv_value(*ratio);
    out << '\n';
  };
  const bool b = r.baseline.has_value();
  row("overall_lifetime_frames", r.overall_lifetime, b ? &r.baseline->lifetime : nullptr,
      r.lifetime_ratio);
  row("hardware_delay_ms", r.hardware_delay_ms, b ? &r.baseline->delay_ms : nullptr,
      r.delay_ratio);
  row("avg_rram_voltage_v", r.avg_rram_voltage, b ? &r.baseline->voltage : nullptr,
      r.voltage_ratio);
}

}  // namespace enduromap
