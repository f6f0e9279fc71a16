#include "enduromap/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "enduromap/errors.hpp"
#include "enduromap/rng.hpp"

namespace enduromap {

using json = nlohmann::json;

double Cluster::spikes_of(NeuronId pre_id) const {
  if (const Neuron* n = find_pre(pre_id)) return n->spikes_per_frame;
  std::ostringstream os;
  os << "cluster " << id << ": synapse references missing pre-neuron " << pre_id;
  throw ValidationError(os.str());
}

const Neuron* Cluster::find_pre(NeuronId nid) const {
  auto it = std::lower_bound(pre.begin(), pre.end(), nid,
                             [](const Neuron& n, NeuronId v) { return n.id < v; });
  if (it != pre.end() && it->id == nid) return &*it;
  return nullptr;
}

bool Cluster::has_post(NeuronId nid) const {
  return std::binary_search(post.begin(), post.end(), nid);
}

void Cluster::canonicalize() {
  std::sort(pre.begin(), pre.end(), [](const Neuron& a, const Neuron& b) { return a.id < b.id; });
  std::sort(post.begin(), post.end());
  std::sort(synapses.begin(), synapses.end(), [](const Synapse& a, const Synapse& b) {
    return std::pair{a.pre, a.post} < std::pair{b.pre, b.post};
  });
}

const char* to_string(FrameSemantics f) {
  return f == FrameSemantics::Image ? "image" : "500ms-window";
}

FrameSemantics frame_semantics_from_string(const std::string& s) {
  if (s == "image") return FrameSemantics::Image;
  if (s == "500ms-window") return FrameSemantics::Window500ms;
  throw ValidationError("unknown frame_semantics: '" + s + "'");
}

const Cluster* Workload::find_cluster(ClusterId id) const {
  for (const Cluster& c : clusters) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

ResistanceState quantize_weight(double abs_weight, double lo, double hi) {
  if (!(hi > lo)) {
    // degenerate range: zero conductance is HRS, anything else the top level
    return abs_weight == 0.0 ? ResistanceState::HRS : ResistanceState::LRS3;
  }
  const int bucket = std::min(3, static_cast<int>(4.0 * (abs_weight - lo) / (hi - lo)));
  switch (bucket) {
    case 0: return ResistanceState::HRS;
    case 1: return ResistanceState::LRS1;
    case 2: return ResistanceState::LRS2;
    default: return ResistanceState::LRS3;
  }
}

namespace {

ResistanceState quantize_thresholds(double absw, const std::array<double, 3>& t) {
  if (absw < t[0]) return ResistanceState::HRS;
  if (absw < t[1]) return ResistanceState::LRS1;
  if (absw < t[2]) return ResistanceState::LRS2;
  return ResistanceState::LRS3;
}

}  // namespace

void assign_states(Workload& w, const QuantizationRule& rule) {
  if (rule.thresholds) {
    for (Cluster& c : w.clusters) {
      for (Synapse& s : c.synapses) {
        s.state = quantize_thresholds(std::abs(s.weight), *rule.thresholds);
      }
    }
    return;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Cluster& c : w.clusters) {
    for (const Synapse& s : c.synapses) {
      lo = std::min(lo, std::abs(s.weight));
      hi = std::max(hi, std::abs(s.weight));
    }
  }
  for (Cluster& c : w.clusters) {
    for (Synapse& s : c.synapses) s.state = quantize_weight(std::abs(s.weight), lo, hi);
  }
}

void validate_workload(const Workload& w) {
  std::set<ClusterId> cluster_ids;
  std::map<NeuronId, double> pre_spikes;  // global consistency of shared pre-neurons
  for (const Cluster& c : w.clusters) {
    if (!cluster_ids.insert(c.id).second) {
      throw ValidationError("duplicate cluster id " + std::to_string(c.id));
    }
    const std::string where = "cluster " + std::to_string(c.id);
    if (c.pre.empty()) throw ValidationError(where + ": empty pre-neuron set");
    if (c.post.empty()) throw ValidationError(where + ": empty post-neuron set");
    for (std::size_t i = 0; i + 1 < c.pre.size(); ++i) {
      if (!(c.pre[i].id < c.pre[i + 1].id)) {
        throw ValidationError(where + ": duplicate pre-neuron id " +
                              std::to_string(c.pre[i + 1].id));
      }
    }
    for (std::size_t i = 0; i + 1 < c.post.size(); ++i) {
      if (!(c.post[i] < c.post[i + 1])) {
        throw ValidationError(where + ": duplicate post-neuron id " +
                              std::to_string(c.post[i + 1]));
      }
    }
    for (const Neuron& n : c.pre) {
      if (!std::isfinite(n.spikes_per_frame) || n.spikes_per_frame < 0.0) {
        throw ValidationError(where + ": neuron " + std::to_string(n.id) +
                              " has invalid spike rate");
      }
      auto [it, inserted] = pre_spikes.emplace(n.id, n.spikes_per_frame);
      if (!inserted && it->second != n.spikes_per_frame) {
        throw ValidationError("neuron " + std::to_string(n.id) +
                              " has inconsistent spike rates across clusters");
      }
    }
    std::set<std::pair<NeuronId, NeuronId>> seen;
    for (const Synapse& s : c.synapses) {
      const std::string syn = where + ": synapse (" + std::to_string(s.pre) + " -> " +
                              std::to_string(s.post) + ")";
      if (!c.find_pre(s.pre)) throw ValidationError(syn + " references missing pre-neuron");
      if (!c.has_post(s.post)) throw ValidationError(syn + " references missing post-neuron");
      if (!std::isfinite(s.weight)) throw ValidationError(syn + " has non-finite weight");
      if (!seen.insert({s.pre, s.post}).second) {
        throw ValidationError(syn + " duplicates a (pre, post) pair");
      }
    }
  }
  for (const InterClusterEdge& e : w.edges) {
    if (!cluster_ids.count(e.src) || !cluster_ids.count(e.dst)) {
      throw ValidationError("inter-cluster edge (" + std::to_string(e.src) + " -> " +
                            std::to_string(e.dst) + ") references missing cluster");
    }
    if (!std::isfinite(e.spikes) || e.spikes < 0.0) {
      throw ValidationError("inter-cluster edge (" + std::to_string(e.src) + " -> " +
                            std::to_string(e.dst) + ") has invalid spike rate");
    }
  }
}

namespace {

void warn_unknown_fields(const json& j, std::initializer_list<const char*> known,
                         const std::string& where, std::vector<std::string>& warnings) {
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end()) {
      warnings.push_back("ignoring unknown field '" + key + "' in " + where);
    }
  }
}

double require_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw ValidationError(where + ": missing or non-numeric field '" + key + "'");
  }
  return j[key].get<double>();
}

std::int64_t require_int(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number_integer()) {
    throw ValidationError(where + ": missing or non-integer field '" + key + "'");
  }
  return j[key].get<std::int64_t>();
}

}  // namespace

WorkloadFile load_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open workload file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("workload file " + path.string() + ": " + e.what());
  }

  WorkloadFile out;
  Workload& w = out.workload;
  warn_unknown_fields(j, {"frame_semantics", "clusters", "edges"}, "workload root",
                      out.warnings);

  if (j.contains("frame_semantics")) {
    w.frame_semantics = frame_semantics_from_string(j["frame_semantics"].get<std::string>());
  }
  if (j.contains("clusters")) {
    for (const json& jc : j["clusters"]) {
      Cluster c;
      const std::string where = "cluster entry " + std::to_string(w.clusters.size());
      warn_unknown_fields(jc, {"id", "pre", "post", "synapses"}, where, out.warnings);
      c.id = require_int(jc, "id", where);
      const std::string cname = "cluster " + std::to_string(c.id);
      for (const json& jn : jc.value("pre", json::array())) {
        warn_unknown_fields(jn, {"id", "spikes"}, cname + " pre-neuron", out.warnings);
        c.pre.push_back({require_int(jn, "id", cname), require_number(jn, "spikes", cname)});
      }
      for (const json& jn : jc.value("post", json::array())) {
        warn_unknown_fields(jn, {"id"}, cname + " post-neuron", out.warnings);
        c.post.push_back(require_int(jn, "id", cname));
      }
      for (const json& js : jc.value("synapses", json::array())) {
        warn_unknown_fields(js, {"pre", "post", "weight"}, cname + " synapse", out.warnings);
        Synapse s;
        s.pre = require_int(js, "pre", cname);
        s.post = require_int(js, "post", cname);
        s.weight = require_number(js, "weight", cname);
        c.synapses.push_back(s);
      }
      c.canonicalize();
      w.clusters.push_back(std::move(c));
    }
  }
  if (j.contains("edges")) {
    for (const json& je : j["edges"]) {
      warn_unknown_fields(je, {"src", "dst", "spikes"}, "edge entry", out.warnings);
      w.edges.push_back({require_int(je, "src", "edge"), require_int(je, "dst", "edge"),
                         require_number(je, "spikes", "edge")});
    }
  }

  assign_states(w);
  validate_workload(w);
  return out;
}

void save_workload(const Workload& w, const std::filesystem::path& path) {
  json j;
  j["frame_semantics"] = to_string(w.frame_semantics);
  json jclusters = json::array();
  for (const Cluster& c : w.clusters) {
    json jc;
    jc["id"] = c.id;
    json jpre = json::array();
    for (const Neuron& n : c.pre) jpre.push_back({{"id", n.id}, {"spikes", n.spikes_per_frame}});
    json jpost = json::array();
    for (NeuronId n : c.post) jpost.push_back({{"id", n}});
    json jsyn = json::array();
    for (const Synapse& s : c.synapses) {
      jsyn.push_back({{"pre", s.pre}, {"post", s.post}, {"weight", s.weight}});
    }
    jc["pre"] = std::move(jpre);
    jc["post"] = std::move(jpost);
    jc["synapses"] = std::move(jsyn);
    jclusters.push_back(std::move(jc));
  }
  j["clusters"] = std::move(jclusters);
  json jedges = json::array();
  for (const InterClusterEdge& e : w.edges) {
    jedges.push_back({{"src", e.src}, {"dst", e.dst}, {"spikes", e.spikes}});
  }
  j["edges"] = std::move(jedges);

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write workload file: " + path.string());
  out << j.dump(2) << '\n';
}

SpikeHistogram spike_histogram(const Workload& w, int bins) {
  if (bins < 1) throw ConfigError("spike_histogram: bins must be >= 1");
  SpikeHistogram h;
  std::vector<double> values;
  for (const Cluster& c : w.clusters) {
    for (const Synapse& s : c.synapses) values.push_back(c.spikes_of(s.pre));
  }
  h.total_synapses = values.size();
  if (values.empty()) return h;

  h.max_spikes = *std::max_element(values.begin(), values.end());
  const double hi = h.max_spikes > 0.0 ? h.max_spikes : 1.0;
  h.bin_edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) h.bin_edges[i] = hi * i / bins;
  h.counts.assign(bins, 0);
  for (double v : values) {
    int b = std::min(bins - 1, static_cast<int>(v / hi * bins));
    ++h.counts[b];
  }
  return h;
}

void write_histogram_csv(const SpikeHistogram& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write histogram file: " + path.string());
  out << "bin_low,bin_high,count\n";
  out.precision(17);
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << h.bin_edges[i] << ',' << h.bin_edges[i + 1] << ',' << h.counts[i] << '\n';
  }
}

Workload generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n_clusters < 1 || spec.pre_per_cluster < 1 || spec.post_per_cluster < 1) {
    throw ConfigError("generate_synthetic: sizes must be >= 1");
  }
  if (!(spec.density > 0.0) || spec.density > 1.0) {
    throw ConfigError("generate_synthetic: density must be in (0, 1]");
  }

  Workload w;
  w.frame_semantics = spec.frame_semantics;
  NeuronId next_id = 0;
  double observed_max = 0.0;
  Neuron* argmax = nullptr;

  for (int ci = 0; ci < spec.n_clusters; ++ci) {
    rng::Stream stream(rng::derive(seed, static_cast<std::uint64_t>(ci)));
    Cluster c;
    c.id = ci;
    for (int i = 0; i < spec.pre_per_cluster; ++i) {
      c.pre.push_back({next_id++,
                       stream.lognormal(spec.spike_lognorm_mu, spec.spike_lognorm_sigma)});
    }
    for (int i = 0; i < spec.post_per_cluster; ++i) c.post.push_back(next_id++);
    for (const Neuron& n : c.pre) {
      for (NeuronId q : c.post) {
        if (stream.uniform() < spec.density) {
          c.synapses.push_back({n.id, q, stream.normal(spec.weight_mean, spec.weight_stddev),
                                ResistanceState::HRS});
        }
      }
    }
    c.canonicalize();
    w.clusters.push_back(std::move(c));
  }

  for (Cluster& c : w.clusters) {
    for (Neuron& n : c.pre) {
      if (n.spikes_per_frame > observed_max) {
        observed_max = n.spikes_per_frame;
        argmax = &n;
      }
    }
  }
  if (argmax && observed_max > 0.0) {
    const double scale = spec.max_spikes / observed_max;
    for (Cluster& c : w.clusters) {
      for (Neuron& n : c.pre) n.spikes_per_frame *= scale;
    }
    argmax->spikes_per_frame = spec.max_spikes;  // exact despite rounding
  }

  rng::Stream edge_stream(rng::derive(seed, 0x9e37ULL + spec.n_clusters));
  for (int ci = 0; ci + 1 < spec.n_clusters; ++ci) {
    w.edges.push_back({ci, ci + 1,
                       edge_stream.lognormal(spec.spike_lognorm_mu, spec.spike_lognorm_sigma)});
  }

  assign_states(w);
  validate_workload(w);
  return w;
}

Workload partition_flat(const NeuronGraph& graph, int m) {
  if (m < 1) throw ConfigError("partition_flat: crossbar dimension must be >= 1");

  std::map<NeuronId, double> spikes;
  for (const Neuron& n : graph.neurons) {
    if (!spikes.emplace(n.id, n.spikes_per_frame).second) {
      throw ValidationError("partition_flat: duplicate neuron id " + std::to_string(n.id));
    }
  }
  std::map<NeuronId, std::vector<GraphEdge>> fanout;
  std::map<NeuronId, int> fanin;
  for (const GraphEdge& e : graph.edges) {
    if (!spikes.count(e.pre) || !spikes.count(e.post)) {
      throw ValidationError("partition_flat: edge references missing neuron");
    }
    fanout[e.pre].push_back(e);
    ++fanin[e.post];
  }
  for (const auto& [nid, cnt] : fanin) {
    if (cnt > m) {
      throw InfeasibleError("partition_flat: neuron " + std::to_string(nid) + " has fan-in " +
                            std::to_string(cnt) + " > " + std::to_string(m));
    }
  }
  for (const auto& [nid, edges] : fanout) {
    if (static_cast<int>(edges.size()) > m) {
      throw InfeasibleError("partition_flat: neuron " + std::to_string(nid) + " has fan-out " +
                            std::to_string(edges.size()) + " > " + std::to_string(m));
    }
  }

  Workload w;
  Cluster current;
  ClusterId next_cluster = 0;
  current.id = next_cluster;
  std::set<NeuronId> cur_pre, cur_post;

  auto flush = [&] {
    if (!cur_pre.empty()) {
      current.canonicalize();
      w.clusters.push_back(current);
      current = Cluster{};
      current.id = ++next_cluster;
      cur_pre.clear();
      cur_post.clear();
    }
  };

  for (const auto& [nid, edges] : fanout) {  // ascending neuron id
    std::set<NeuronId> targets;
    for (const GraphEdge& e : edges) targets.insert(e.post);
    std::set<NeuronId> post_union = cur_post;
    post_union.insert(targets.begin(), targets.end());
    if (static_cast<int>(cur_pre.size()) + 1 > m ||
        static_cast<int>(post_union.size()) > m) {
      flush();
      post_union = targets;
    }
    cur_pre.insert(nid);
    current.pre.push_back({nid, spikes.at(nid)});
    for (NeuronId t : targets) {
      if (!cur_post.count(t)) current.post.push_back(t);
    }
    cur_post = std::move(post_union);
    for (const GraphEdge& e : edges) {
      current.synapses.push_back({e.pre, e.post, e.weight, ResistanceState::HRS});
    }
  }
  flush();

  // inter-cluster spike edges: a neuron that is post in A and pre in B carries
  // its rate from A to B
  std::map<std::pair<ClusterId, ClusterId>, double> edge_spikes;
  for (const Cluster& a : w.clusters) {
    for (const Cluster& b : w.clusters) {
      if (a.id == b.id) continue;
      double total = 0.0;
      for (NeuronId p : a.post) {
        if (b.find_pre(p)) total += spikes.at(p);
      }
      if (total > 0.0) edge_spikes[{a.id, b.id}] = total;
    }
  }
  for (const auto& [key, spk] : edge_spikes) w.edges.push_back({key.first, key.second, spk});

  assign_states(w);
  validate_workload(w);
  return w;
}

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void hash_u64(std::uint64_t& h, std::uint64_t v) { hash_bytes(h, &v, sizeof(v)); }

void hash_double(std::uint64_t& h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  hash_u64(h, bits);
}

}  // namespace

std::uint64_t content_hash(const Cluster& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  hash_u64(h, c.pre.size());
  for (const Neuron& n : c.pre) {
    hash_u64(h, static_cast<std::uint64_t>(n.id));
    hash_double(h, n.spikes_per_frame);
  }
  hash_u64(h, c.post.size());
  for (NeuronId n : c.post) hash_u64(h, static_cast<std::uint64_t>(n));
  hash_u64(h, c.synapses.size());
  for (const Synapse& s : c.synapses) {
    hash_u64(h, static_cast<std::uint64_t>(s.pre));
    hash_u64(h, static_cast<std::uint64_t>(s.post));
    hash_double(h, s.weight);
    hash_u64(h, static_cast<std::uint64_t>(s.state));
  }
  return h;
}

}  // namespace enduromap
