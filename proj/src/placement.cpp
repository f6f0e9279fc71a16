#include "enduromap/placement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "enduromap/errors.hpp"

namespace enduromap {

using json = nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Index-compressed view of a cluster against one endurance map.
struct Instance {
  int m = 0;
  std::vector<NeuronId> pre_ids;   // ascending
  std::vector<NeuronId> post_ids;  // ascending
  struct Syn {
    int pi, qi;
    const Grid* grid;  // per-state endurance grid
    double spikes;
    NeuronId pre, post;
  };
  std::vector<Syn> syns;                     // canonical (pre, post) order
  std::vector<std::vector<int>> syns_of_pre;   // indices into syns
  std::vector<std::vector<int>> syns_of_post;
};

Instance make_instance(const Cluster& c, const EnduranceMap& maps) {
  Instance inst;
  inst.m = maps.m;
  if (static_cast<int>(c.pre.size()) > inst.m || static_cast<int>(c.post.size()) > inst.m) {
    std::ostringstream os;
    os << "cluster " << c.id << " does not fit a " << inst.m << "x" << inst.m
       << " crossbar (|pre| = " << c.pre.size() << ", |post| = " << c.post.size() << ")";
    throw InfeasibleError(os.str());
  }
  for (const Neuron& n : c.pre) inst.pre_ids.push_back(n.id);
  inst.post_ids = c.post;
  inst.syns_of_pre.resize(c.pre.size());
  inst.syns_of_post.resize(c.post.size());
  for (const Synapse& s : c.synapses) {
    const int pi = static_cast<int>(
        std::lower_bound(inst.pre_ids.begin(), inst.pre_ids.end(), s.pre) -
        inst.pre_ids.begin());
    const int qi = static_cast<int>(
        std::lower_bound(inst.post_ids.begin(), inst.post_ids.end(), s.post) -
        inst.post_ids.begin());
    const Grid* grid = is_lrs(s.state) ? &maps.lrs : &maps.hrs;
    const double spk = c.spikes_of(s.pre);
    inst.syns_of_pre[pi].push_back(static_cast<int>(inst.syns.size()));
    inst.syns_of_post[qi].push_back(static_cast<int>(inst.syns.size()));
    inst.syns.push_back({pi, qi, grid, spk, s.pre, s.post});
  }
  return inst;
}

double syn_value(const Instance::Syn& s, int row, int col) {
  if (s.spikes == 0.0) return kInf;
  return (*s.grid)(row, col) / s.spikes;
}

// min over synapses; argmin is the first minimal synapse in canonical order
std::pair<double, int> eval_assignment(const Instance& inst, const std::vector<int>& rows,
                                       const std::vector<int>& cols) {
  double best = kInf;
  int arg = -1;
  for (std::size_t i = 0; i < inst.syns.size(); ++i) {
    const auto& s = inst.syns[i];
    const double v = syn_value(s, rows[s.pi], cols[s.qi]);
    if (v < best) {
      best = v;
      arg = static_cast<int>(i);
    }
  }
  return {best, arg};
}

PlacementResult to_result(const Instance& inst, const Cluster& c,
                          const std::vector<int>& rows, const std::vector<int>& cols,
                          const EnduranceMap& maps) {
  PlacementResult r;
  for (std::size_t i = 0; i < inst.pre_ids.size(); ++i) r.placement.row_of[inst.pre_ids[i]] = rows[i];
  for (std::size_t i = 0; i < inst.post_ids.size(); ++i) r.placement.col_of[inst.post_ids[i]] = cols[i];
  const LifetimeEval ev = lifetime_of_placement(c, r.placement, maps);
  r.lifetime = ev.lifetime;
  r.limiting_synapse = ev.limiting;
  return r;
}

}  // namespace

void validate_placement(const Cluster& c, const Placement& p, int m) {
  const std::string where = "cluster " + std::to_string(c.id);
  if (p.row_of.size() != c.pre.size() || p.col_of.size() != c.post.size()) {
    throw ValidationError(where + ": placement does not cover the cluster's neurons");
  }
  std::set<int> rows, cols;
  for (const Neuron& n : c.pre) {
    auto it = p.row_of.find(n.id);
    if (it == p.row_of.end()) {
      throw ValidationError(where + ": pre-neuron " + std::to_string(n.id) + " unplaced");
    }
    if (it->second < 0 || it->second >= m) {
      throw ValidationError(where + ": row index out of range for neuron " +
                            std::to_string(n.id));
    }
    if (!rows.insert(it->second).second) {
      throw ValidationError(where + ": two pre-neurons share row " +
                            std::to_string(it->second));
    }
  }
  for (NeuronId nid : c.post) {
    auto it = p.col_of.find(nid);
    if (it == p.col_of.end()) {
      throw ValidationError(where + ": post-neuron " + std::to_string(nid) + " unplaced");
    }
    if (it->second < 0 || it->second >= m) {
      throw ValidationError(where + ": column index out of range for neuron " +
                            std::to_string(nid));
    }
    if (!cols.insert(it->second).second) {
      throw ValidationError(where + ": two post-neurons share column " +
                            std::to_string(it->second));
    }
  }
}

double synapse_lifetime(ResistanceState state, double spikes_per_frame, int row, int col,
                        const EnduranceMap& maps) {
  if (spikes_per_frame < 0.0 || !std::isfinite(spikes_per_frame)) {
    throw ValidationError("synapse_lifetime: spike rate must be finite and >= 0");
  }
  if (spikes_per_frame == 0.0) return kInf;
  const Grid& g = is_lrs(state) ? maps.lrs : maps.hrs;
  return g(row, col) / spikes_per_frame;
}

LifetimeEval lifetime_of_placement(const Cluster& c, const Placement& p,
                                   const EnduranceMap& maps) {
  validate_placement(c, p, maps.m);
  LifetimeEval ev;
  ev.lifetime = kInf;
  for (const Synapse& s : c.synapses) {
    const double v = synapse_lifetime(s.state, c.spikes_of(s.pre), p.row_of.at(s.pre),
                                      p.col_of.at(s.post), maps);
    if (v < ev.lifetime) {
      ev.lifetime = v;
      ev.limiting = {s.pre, s.post};
    }
  }
  return ev;
}

PlacementResult brute_force_place(const Cluster& c, const EnduranceMap& maps,
                                  std::uint64_t max_assignments) {
  const Instance inst = make_instance(c, maps);
  const int m = inst.m;
  const int np = static_cast<int>(inst.pre_ids.size());
  const int nq = static_cast<int>(inst.post_ids.size());

  auto falling = [&](int k) -> double {
    double v = 1.0;
    for (int i = 0; i < k; ++i) v *= static_cast<double>(m - i);
    return v;
  };
  if (falling(np) * falling(nq) > static_cast<double>(max_assignments)) {
    std::ostringstream os;
    os << "cluster " << c.id << ": " << falling(np) * falling(nq)
       << " assignments exceed the enumeration limit (" << max_assignments
       << "); use optimize_placement";
    throw InfeasibleError(os.str());
  }

  std::vector<int> rows(np, -1), cols(nq, -1);
  std::vector<char> row_used(m, 0), col_used(m, 0);
  double best = -kInf;
  std::vector<int> best_rows, best_cols;

  // lexicographic enumeration; strict improvement keeps the lex-smallest optimum
  auto enum_cols = [&](auto&& self, int qi) -> void {
    if (qi == nq) {
      const auto [value, arg] = eval_assignment(inst, rows, cols);
      if (value > best) {
        best = value;
        best_rows = rows;
        best_cols = cols;
      }
      return;
    }
    for (int col = 0; col < m; ++col) {
      if (col_used[col]) continue;
      col_used[col] = 1;
      cols[qi] = col;
      self(self, qi + 1);
      col_used[col] = 0;
    }
  };
  auto enum_rows = [&](auto&& self, int pi) -> void {
    if (pi == np) {
      enum_cols(enum_cols, 0);
      return;
    }
    for (int row = 0; row < m; ++row) {
      if (row_used[row]) continue;
      row_used[row] = 1;
      rows[pi] = row;
      self(self, pi + 1);
      row_used[row] = 0;
    }
  };
  enum_rows(enum_rows, 0);

  PlacementResult r = to_result(inst, c, best_rows, best_cols, maps);
  r.stats.oracle_used = true;
  return r;
}

namespace {

struct SearchState {
  std::vector<int> rows, cols;
  std::vector<int> free_rows, free_cols;  // kept sorted
  std::vector<double> lt;                 // per-synapse lifetimes
  double min_lt = kInf;
  double lt_sum = 0.0;  // finite lifetimes only; plateau tie-break objective
  int argmin = -1;      // limiting synapse index, -1 when unbounded

  static double finite_part(double v) { return std::isfinite(v) ? v : 0.0; }

  void rebuild(const Instance& inst) {
    std::vector<char> used_r(inst.m, 0), used_c(inst.m, 0);
    for (int r : rows) used_r[r] = 1;
    for (int c : cols) used_c[c] = 1;
    free_rows.clear();
    free_cols.clear();
    for (int i = 0; i < inst.m; ++i) {
      if (!used_r[i]) free_rows.push_back(i);
      if (!used_c[i]) free_cols.push_back(i);
    }
    lt.resize(inst.syns.size());
    lt_sum = 0.0;
    for (std::size_t i = 0; i < inst.syns.size(); ++i) {
      lt[i] = syn_value(inst.syns[i], rows[inst.syns[i].pi], cols[inst.syns[i].qi]);
      lt_sum += finite_part(lt[i]);
    }
    std::tie(min_lt, argmin) = scan_min();
  }

  std::pair<double, int> scan_min() const {
    double best = kInf;
    int arg = -1;
    for (std::size_t i = 0; i < lt.size(); ++i) {
      if (lt[i] < best) {
        best = lt[i];
        arg = static_cast<int>(i);
      }
    }
    return {best, arg};
  }
};

void greedy_seed(const Instance& inst, std::vector<int>& rows, std::vector<int>& cols) {
  const int m = inst.m;
  rows.assign(inst.pre_ids.size(), -1);
  cols.assign(inst.post_ids.size(), -1);
  std::vector<char> row_used(m, 0), col_used(m, 0);

  std::vector<int> order(inst.syns.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return inst.syns[a].spikes > inst.syns[b].spikes;  // canonical order breaks ties
  });

  for (int si : order) {
    const auto& s = inst.syns[si];
    const bool has_row = rows[s.pi] >= 0;
    const bool has_col = cols[s.qi] >= 0;
    if (has_row && has_col) continue;
    if (has_row) {
      int best_c = -1;
      double best_v = -kInf;
      for (int col = 0; col < m; ++col) {
        if (col_used[col]) continue;
        const double v = (*s.grid)(rows[s.pi], col);
        if (v > best_v) {
          best_v = v;
          best_c = col;
        }
      }
      cols[s.qi] = best_c;
      col_used[best_c] = 1;
    } else if (has_col) {
      int best_r = -1;
      double best_v = -kInf;
      for (int row = 0; row < m; ++row) {
        if (row_used[row]) continue;
        const double v = (*s.grid)(row, cols[s.qi]);
        if (v > best_v) {
          best_v = v;
          best_r = row;
        }
      }
      rows[s.pi] = best_r;
      row_used[best_r] = 1;
    } else {
      int best_r = -1, best_c = -1;
      double best_v = -kInf;
      for (int row = 0; row < m; ++row) {
        if (row_used[row]) continue;
        for (int col = 0; col < m; ++col) {
          if (col_used[col]) continue;
          const double v = (*s.grid)(row, col);
          if (v > best_v) {
            best_v = v;
            best_r = row;
            best_c = col;
          }
        }
      }
      rows[s.pi] = best_r;
      row_used[best_r] = 1;
      cols[s.qi] = best_c;
      col_used[best_c] = 1;
    }
  }
  // neurons without synapses take the smallest free ports, in id order
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0) {
      for (int row = 0; row < m; ++row) {
        if (!row_used[row]) {
          rows[i] = row;
          row_used[row] = 1;
          break;
        }
      }
    }
  }
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] < 0) {
      for (int col = 0; col < m; ++col) {
        if (!col_used[col]) {
          cols[i] = col;
          col_used[col] = 1;
          break;
        }
      }
    }
  }
}

enum class Move { RowSwap, RowRelocate, ColSwap, ColRelocate };

// One restart of iterated local search over the swap/relocate neighborhood.
// Moves that raise the minimum must involve the limiting synapse's row or
// column, so half the proposals target it. Equal-minimum moves are kept
// (plateau walks), worsening moves are reverted, and after a stretch without
// improvement a short random kick perturbs the state; the best visited state
// is restored at the end, so the restart's result is monotone in budget.
// Returns the evaluated move count.
long climb(const Instance& inst, SearchState& st, long iterations, rng::Stream& stream,
           double& global_best, std::vector<double>& trace) {
  const int np = static_cast<int>(inst.pre_ids.size());
  const int nq = static_cast<int>(inst.post_ids.size());

  std::vector<Move> moves;
  if (np >= 2) moves.push_back(Move::RowSwap);
  if (!st.free_rows.empty() && np >= 1) moves.push_back(Move::RowRelocate);
  if (nq >= 2) moves.push_back(Move::ColSwap);
  if (!st.free_cols.empty() && nq >= 1) moves.push_back(Move::ColRelocate);
  if (moves.empty()) return 0;

  std::vector<int> touched;
  std::vector<double> saved;

  auto update_syn = [&](int si) {
    touched.push_back(si);
    saved.push_back(st.lt[si]);
    const auto& s = inst.syns[si];
    st.lt[si] = syn_value(s, st.rows[s.pi], st.cols[s.qi]);
  };

  struct Applied {
    Move mv;
    int a, b, freed, taken_idx;
  };

  // applies a move in place; operand `a` < 0 draws it at random
  auto apply = [&](Move mv, int a) -> Applied {
    Applied rec{mv, a, -1, -1, -1};
    switch (mv) {
      case Move::RowSwap: {
        if (rec.a < 0) rec.a = static_cast<int>(stream.index(np));
        rec.b = static_cast<int>(stream.index(np - 1));
        if (rec.b >= rec.a) ++rec.b;
        std::swap(st.rows[rec.a], st.rows[rec.b]);
        for (int si : inst.syns_of_pre[rec.a]) update_syn(si);
        for (int si : inst.syns_of_pre[rec.b]) update_syn(si);
        break;
      }
      case Move::RowRelocate: {
        if (rec.a < 0) rec.a = static_cast<int>(stream.index(np));
        rec.taken_idx = static_cast<int>(stream.index(st.free_rows.size()));
        rec.freed = st.rows[rec.a];
        st.rows[rec.a] = st.free_rows[rec.taken_idx];
        for (int si : inst.syns_of_pre[rec.a]) update_syn(si);
        break;
      }
      case Move::ColSwap: {
        if (rec.a < 0) rec.a = static_cast<int>(stream.index(nq));
        rec.b = static_cast<int>(stream.index(nq - 1));
        if (rec.b >= rec.a) ++rec.b;
        std::swap(st.cols[rec.a], st.cols[rec.b]);
        for (int si : inst.syns_of_post[rec.a]) update_syn(si);
        for (int si : inst.syns_of_post[rec.b]) update_syn(si);
        break;
      }
      case Move::ColRelocate: {
        if (rec.a < 0) rec.a = static_cast<int>(stream.index(nq));
        rec.taken_idx = static_cast<int>(stream.index(st.free_cols.size()));
        rec.freed = st.cols[rec.a];
        st.cols[rec.a] = st.free_cols[rec.taken_idx];
        for (int si : inst.syns_of_post[rec.a]) update_syn(si);
        break;
      }
    }
    return rec;
  };

  auto commit_free_lists = [&](const Applied& rec) {
    if (rec.mv == Move::RowRelocate) {
      st.free_rows[rec.taken_idx] = rec.freed;
      std::sort(st.free_rows.begin(), st.free_rows.end());
    } else if (rec.mv == Move::ColRelocate) {
      st.free_cols[rec.taken_idx] = rec.freed;
      std::sort(st.free_cols.begin(), st.free_cols.end());
    }
  };

  auto revert = [&](const Applied& rec) {
    switch (rec.mv) {
      case Move::RowSwap: std::swap(st.rows[rec.a], st.rows[rec.b]); break;
      case Move::RowRelocate: st.rows[rec.a] = rec.freed; break;
      case Move::ColSwap: std::swap(st.cols[rec.a], st.cols[rec.b]); break;
      case Move::ColRelocate: st.cols[rec.a] = rec.freed; break;
    }
    for (std::size_t i = 0; i < touched.size(); ++i) st.lt[touched[i]] = saved[i];
  };

  SearchState best = st;
  const long kick_after = 100;  // rejected stretch that triggers a perturbation
  long evaluated = 0;
  long since_improvement = 0;

  // proposals depend only on the stream and state, never on remaining budget,
  // so a longer budget replays a shorter run's trajectory as a prefix and the
  // restored best can only improve with budget
  while (evaluated < iterations) {
    if (since_improvement >= kick_after) {
      const int kick_len = 2 + static_cast<int>(stream.index(3));
      for (int k = 0; k < kick_len && evaluated < iterations; ++k) {
        touched.clear();
        saved.clear();
        const Applied rec = apply(moves[stream.index(moves.size())], -1);
        commit_free_lists(rec);
        ++evaluated;
      }
      std::tie(st.min_lt, st.argmin) = st.scan_min();
      st.lt_sum = 0.0;
      for (double v : st.lt) st.lt_sum += SearchState::finite_part(v);
      since_improvement = 0;
      continue;
    }

    Move mv = moves[stream.index(moves.size())];
    int a = -1;
    if (st.argmin >= 0 && stream.uniform() < 0.5) {
      const auto& lim = inst.syns[st.argmin];
      std::vector<Move> ops;
      if (np >= 2) ops.push_back(Move::RowSwap);
      if (!st.free_rows.empty()) ops.push_back(Move::RowRelocate);
      if (nq >= 2) ops.push_back(Move::ColSwap);
      if (!st.free_cols.empty()) ops.push_back(Move::ColRelocate);
      mv = ops[stream.index(ops.size())];
      a = (mv == Move::RowSwap || mv == Move::RowRelocate) ? lim.pi : lim.qi;
    }

    touched.clear();
    saved.clear();
    const Applied rec = apply(mv, a);
    ++evaluated;

    const auto [cand, cand_arg] = st.scan_min();
    double sum_delta = 0.0;
    for (std::size_t i = 0; i < touched.size(); ++i) {
      sum_delta += SearchState::finite_part(st.lt[touched[i]]) -
                   SearchState::finite_part(saved[i]);
    }
    // lexicographic acceptance: raise the minimum, or hold it while not
    // lowering the total (plateau moves may only shift synapses sideways or
    // onto better cells)
    if (cand > st.min_lt || (cand == st.min_lt && sum_delta >= 0.0)) {
      const bool improved = cand > st.min_lt;
      st.min_lt = cand;
      st.argmin = cand_arg;
      st.lt_sum += sum_delta;
      commit_free_lists(rec);
      if (improved) {
        since_improvement = 0;
        if (cand > best.min_lt) best = st;
        if (cand > global_best) {
          global_best = cand;
          trace.push_back(cand);
        }
      } else {
        ++since_improvement;
      }
    } else {
      revert(rec);
      ++since_improvement;
    }
  }

  if (best.min_lt > st.min_lt) st = best;
  return evaluated;
}

bool lex_less(const std::vector<int>& ra, const std::vector<int>& ca,
              const std::vector<int>& rb, const std::vector<int>& cb) {
  if (ra != rb) return ra < rb;
  return ca < cb;
}

}  // namespace

Placement random_placement(const Cluster& c, int m, rng::Stream& stream) {
  if (static_cast<int>(c.pre.size()) > m || static_cast<int>(c.post.size()) > m) {
    throw InfeasibleError("random_placement: cluster " + std::to_string(c.id) +
                          " does not fit the crossbar");
  }
  const std::vector<int> rows = stream.sample_indices(m, static_cast<int>(c.pre.size()));
  const std::vector<int> cols = stream.sample_indices(m, static_cast<int>(c.post.size()));
  Placement p;
  for (std::size_t i = 0; i < c.pre.size(); ++i) p.row_of[c.pre[i].id] = rows[i];
  for (std::size_t i = 0; i < c.post.size(); ++i) p.col_of[c.post[i]] = cols[i];
  return p;
}

PlacementResult optimize_placement(const Cluster& c, const EnduranceMap& maps,
                                   const PlacementBudget& budget, std::uint64_t seed) {
  if (budget.iterations < 0 || budget.restarts < 1) {
    throw ConfigError("optimize_placement: iterations must be >= 0 and restarts >= 1");
  }
  const Instance inst = make_instance(c, maps);

  SolverStats stats;
  stats.restarts = budget.restarts;
  double global_best = -kInf;  // gates the improvement trace
  double kept_value = -kInf;
  std::vector<int> best_rows, best_cols;

  for (int r = 0; r < budget.restarts; ++r) {
    rng::Stream stream(rng::derive(seed, static_cast<std::uint64_t>(r)));
    SearchState st;
    if (r == 0) {
      greedy_seed(inst, st.rows, st.cols);
    } else {
      st.rows = stream.sample_indices(inst.m, static_cast<int>(inst.pre_ids.size()));
      st.cols = stream.sample_indices(inst.m, static_cast<int>(inst.post_ids.size()));
    }
    st.rebuild(inst);
    if (st.min_lt > global_best) {
      global_best = st.min_lt;
      stats.best_trace.push_back(st.min_lt);
    }
    stats.iterations += climb(inst, st, budget.iterations, stream, global_best,
                              stats.best_trace);
    // climbing is monotone, so st now holds this restart's best state
    if (best_rows.empty() || st.min_lt > kept_value ||
        (st.min_lt == kept_value && lex_less(st.rows, st.cols, best_rows, best_cols))) {
      kept_value = st.min_lt;
      best_rows = st.rows;
      best_cols = st.cols;
    }
  }

  PlacementResult result = to_result(inst, c, best_rows, best_cols, maps);
  result.stats = std::move(stats);
  return result;
}

void write_placement_json(const Cluster& c, const PlacementResult& r,
                          const std::filesystem::path& path) {
  json j;
  j["cluster_id"] = c.id;
  json rows = json::object();
  for (const auto& [nid, row] : r.placement.row_of) rows[std::to_string(nid)] = row;
  json cols = json::object();
  for (const auto& [nid, col] : r.placement.col_of) cols[std::to_string(nid)] = col;
  j["rows"] = std::move(rows);
  j["cols"] = std::move(cols);
  j["lifetime"] = std::isfinite(r.lifetime) ? json(r.lifetime) : json(nullptr);
  if (r.limiting_synapse) {
    j["limiting_synapse"] = {{"pre", r.limiting_synapse->first},
                             {"post", r.limiting_synapse->second}};
  } else {
    j["limiting_synapse"] = nullptr;
  }
  j["solver"] = {{"iterations", r.stats.iterations},
                 {"restarts", r.stats.restarts},
                 {"oracle_used", r.stats.oracle_used}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write placement file: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace enduromap
