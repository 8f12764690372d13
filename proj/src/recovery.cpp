#include "tollcast/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "tollcast/crowd_speed.hpp"
#include "tollcast/errors.hpp"

namespace tollcast {

namespace {

int segments_of(const Edge& e, double segment_length_m) {
  return std::max(1, static_cast<int>(std::lround(e.length_m / segment_length_m)));
}

/// Expands per-edge speeds into per-segment states with slot assignment by
/// cumulative travel time from the trip entry.
StateSequence build_sequence(const Trip& trip, const HighwayGraph& graph,
                             const Route& route,
                             std::span<const double> edge_speeds,
                             const DiscretizationConfig& cfg) {
  StateSequence seq;
  seq.trip_id = trip_uid(trip.txn);
  seq.route = route;
  double t = 0.0;
  for (std::size_t i = 0; i < route.edges.size(); ++i) {
    const Edge& e = graph.edge(route.edges[i]);
    int segs = segments_of(e, cfg.segment_length_m);
    double seg_len = e.length_m / segs;
    double v_ms = edge_speeds[i] / 3.6;
    for (int s = 0; s < segs; ++s) {
      State st;
      st.slot = slot_of(trip.txn.entry_time +
                            static_cast<Timestamp>(std::floor(t)),
                        cfg.slot_width_min)
                    .index;
      st.edge_id = e.id;
      st.segment = s;
      st.speed_kmh = edge_speeds[i];
      seq.states.push_back(std::move(st));
      t += seg_len / v_ms;
    }
  }
  seq.total_time_s = t;
  return seq;
}

std::vector<double> grid_speeds(double limit_kmh, double unit) {
  std::vector<double> out;
  for (double v = unit; v <= limit_kmh + 1e-9; v += unit) out.push_back(v);
  if (out.empty()) out.push_back(limit_kmh);
  return out;
}

}  // namespace

StateSequence sequence_from_edge_speeds(const Trip& trip,
                                        const HighwayGraph& graph,
                                        const Route& route,
                                        std::span<const double> edge_speeds,
                                        const DiscretizationConfig& cfg) {
  return build_sequence(trip, graph, route, edge_speeds, cfg);
}

std::vector<double> StateSequence::edge_speeds_kmh(
    const HighwayGraph& graph) const {
  (void)graph;
  std::vector<double> speeds;
  std::string current;
  for (const auto& st : states) {
    if (st.edge_id != current) {
      speeds.push_back(st.speed_kmh);
      current = st.edge_id;
    }
  }
  return speeds;
}

double StateSequence::mean_speed_kmh(const HighwayGraph& graph) const {
  auto speeds = edge_speeds_kmh(graph);
  double len = 0.0, time_h = 0.0;
  for (std::size_t i = 0; i < route.edges.size(); ++i) {
    double km = graph.edge(route.edges[i]).length_m / 1000.0;
    len += km;
    time_h += km / speeds[i];
  }
  return len / time_h;
}

std::vector<StateSequence> candidate_state_sequences(
    const Trip& trip, const HighwayGraph& graph,
    std::span<const Route> candidate_routes, const DiscretizationConfig& cfg) {
  std::vector<StateSequence> out;
  double tol = cfg.slot_width_min * 60.0 / 2.0;

  for (const auto& route : candidate_routes) {
    double target = ramp_corrected_duration(trip, route, graph);
    double t_ff = free_flow_time_s(graph, route);
    if (target < t_ff - tol) continue;  // faster than free flow: infeasible
    if (target > cfg.duration_slack_factor * t_ff + tol) continue;

    std::size_t k = route.edges.size();
    std::vector<std::vector<double>> speeds(k);
    std::vector<double> lengths(k);
    for (std::size_t i = 0; i < k; ++i) {
      const Edge& e = graph.edge(route.edges[i]);
      speeds[i] = grid_speeds(e.speed_limit_kmh, cfg.search_speed_unit_kmh);
      lengths[i] = e.length_m;
    }
    // Fastest/slowest completions of the suffix starting at edge i.
    std::vector<double> min_rest(k + 1, 0.0), max_rest(k + 1, 0.0);
    for (std::size_t i = k; i-- > 0;) {
      min_rest[i] = min_rest[i + 1] + lengths[i] / (speeds[i].back() / 3.6);
      max_rest[i] = max_rest[i + 1] + lengths[i] / (speeds[i].front() / 3.6);
    }

    std::vector<double> chosen(k);
    std::function<void(std::size_t, double)> dfs = [&](std::size_t i,
                                                       double elapsed) {
      if (i == k) {
        if (std::abs(elapsed - target) <= tol)
          out.push_back(build_sequence(trip, graph, route, chosen, cfg));
        return;
      }
      for (double v : speeds[i]) {
        double t = elapsed + lengths[i] / (v / 3.6);
        if (t + min_rest[i + 1] > target + tol) continue;
        if (t + max_rest[i + 1] < target - tol) continue;
        chosen[i] = v;
        dfs(i + 1, t);
      }
    };
    dfs(0, 0.0);
  }
  return out;
}

void RecoveryObjective::add(const StateSequence& seq,
                            const std::string& vehicle,
                            const HighwayGraph& graph) {
  for (const auto& st : seq.states) {
    GroupKey key{st.edge_id, st.segment, st.slot};
    groups_[key].push_back(st.speed_kmh);
    dirty_.insert(key);
  }
  vehicle_speeds_[vehicle].push_back(seq.mean_speed_kmh(graph));
  snorm_dirty_ = true;
}

void RecoveryObjective::remove(const StateSequence& seq,
                               const std::string& vehicle,
                               const HighwayGraph& graph) {
  for (const auto& st : seq.states) {
    GroupKey key{st.edge_id, st.segment, st.slot};
    auto& vec = groups_[key];
    auto it = std::find(vec.begin(), vec.end(), st.speed_kmh);
    if (it != vec.end()) vec.erase(it);
    dirty_.insert(key);
  }
  auto& vs = vehicle_speeds_[vehicle];
  auto it = std::find(vs.begin(), vs.end(), seq.mean_speed_kmh(graph));
  if (it != vs.end()) vs.erase(it);
  snorm_dirty_ = true;
}

void RecoveryObjective::refresh() {
  for (const auto& key : dirty_) {
    auto& vec = groups_[key];
    int contrib = 0;
    if (vec.size() >= kMinKsSamples) {
      auto report = ks_normality_test(vec, alpha_);
      contrib = report.accepted ? 1 : 0;
    }
    auto it = contribution_.find(key);
    int old = it == contribution_.end() ? 0 : it->second;
    accepted_sum_ += contrib - old;
    contribution_[key] = contrib;
  }
  dirty_.clear();

  if (snorm_dirty_) {
    std::vector<double> stds;
    for (const auto& [vid, speeds] : vehicle_speeds_) {
      if (speeds.size() < 2) continue;
      double mean = 0.0;
      for (double v : speeds) mean += v;
      mean /= speeds.size();
      double s = 0.0;
      for (double v : speeds) s += (v - mean) * (v - mean);
      stds.push_back(std::sqrt(s / speeds.size()));
    }
    snorm_contribution_ = 0.0;
    if (stds.size() >= kMinKsSamples) {
      auto report = ks_normality_test(stds, alpha_);
      if (report.accepted) snorm_contribution_ = 1.0;
    }
    snorm_dirty_ = false;
  }
}

double RecoveryObjective::objective() {
  refresh();
  return accepted_sum_ + snorm_contribution_;
}

std::vector<NormalityReport> RecoveryObjective::reports(double alpha) {
  std::vector<NormalityReport> out;
  for (const auto& [key, vec] : groups_) {
    if (vec.empty()) continue;
    char name[128];
    std::snprintf(name, sizeof(name), "%s#%d@%d", key.edge.c_str(),
                  key.segment, key.slot);
    out.push_back(ks_normality_test(vec, alpha, name));
  }
  std::vector<double> stds;
  for (const auto& [vid, speeds] : vehicle_speeds_) {
    if (speeds.size() < 2) continue;
    double mean = 0.0;
    for (double v : speeds) mean += v;
    mean /= speeds.size();
    double s = 0.0;
    for (double v : speeds) s += (v - mean) * (v - mean);
    stds.push_back(std::sqrt(s / speeds.size()));
  }
  out.push_back(ks_normality_test(stds, alpha, "vehicle-speed-std"));
  return out;
}

namespace {

struct TripCandidates {
  const Trip* trip;
  std::vector<StateSequence> sequences;
  double total_route_length_best = 0.0;
};

/// Duration-matching refinement on the fine grid: coordinate moves of one
/// unit per edge while |T - target| improves.
void refine_sequence(StateSequence& seq, const Trip& trip,
                     const HighwayGraph& graph,
                     const DiscretizationConfig& cfg) {
  double target = ramp_corrected_duration(trip, seq.route, graph);
  auto speeds = seq.edge_speeds_kmh(graph);
  std::vector<double> lengths;
  std::vector<double> limits;
  for (const auto& id : seq.route.edges) {
    lengths.push_back(graph.edge(id).length_m);
    limits.push_back(graph.edge(id).speed_limit_kmh);
  }
  auto total = [&](std::span<const double> v) {
    double t = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) t += lengths[i] / (v[i] / 3.6);
    return t;
  };
  double best = std::abs(total(speeds) - target);
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i < speeds.size(); ++i) {
      for (double delta : {-cfg.speed_unit_kmh, cfg.speed_unit_kmh}) {
        double v = speeds[i] + delta;
        if (v < cfg.speed_unit_kmh || v > limits[i] + 1e-9) continue;
        double saved = speeds[i];
        speeds[i] = v;
        double err = std::abs(total(speeds) - target);
        if (err + 1e-12 < best) {
          best = err;
          improved = true;
        } else {
          speeds[i] = saved;
        }
      }
    }
  }
  seq = build_sequence(trip, graph, seq.route, speeds, cfg);
}

std::string route_lex_key(const StateSequence& seq) {
  std::string key;
  for (const auto& e : seq.route.edges) {
    key += e;
    key += '|';
  }
  return key;
}

}  // namespace

StateSequence refine_to_fine_grid(const StateSequence& seq, const Trip& trip,
                                  const HighwayGraph& graph,
                                  const DiscretizationConfig& cfg) {
  StateSequence refined = seq;
  refine_sequence(refined, trip, graph, cfg);
  return refined;
}

RecoveryResult recover_routes_and_speeds(std::span<const Trip> trips,
                                         const HighwayGraph& graph,
                                         const RecoveryConfig& config) {
  RecoveryResult result;
  std::vector<TripCandidates> work;

  for (const auto& trip : trips) {
    std::vector<Route> routes;
    try {
      routes = enumerate_routes(graph, trip.txn.entry_station,
                                trip.txn.exit_station, config.max_route_edges);
    } catch (const IdentifierError&) {
      result.unrecoverable.push_back(trip_uid(trip.txn));
      continue;
    }
    auto seqs = candidate_state_sequences(trip, graph, routes, config.disc);
    if (seqs.empty()) {
      result.unrecoverable.push_back(trip_uid(trip.txn));
      continue;
    }
    // Candidate order mirrors the incumbent tie-break: shortest route
    // first, then duration match, then the flattest speed profile (drivers
    // hold a roughly constant pace within one trip), then stable keys.
    auto speed_spread = [&](const StateSequence& s) {
      auto speeds = s.edge_speeds_kmh(graph);
      double lo = speeds[0], hi = speeds[0];
      for (double v : speeds) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      return hi - lo;
    };
    std::sort(seqs.begin(), seqs.end(),
              [&](const StateSequence& a, const StateSequence& b) {
                double la = route_length(graph, a.route);
                double lb = route_length(graph, b.route);
                if (la != lb) return la < lb;
                // Flattest profile first: the fine-grid refinement closes
                // any coarse duration gap, so the coarse match is the
                // weaker signal of the two.
                double sa = speed_spread(a), sb = speed_spread(b);
                if (sa != sb) return sa < sb;
                auto da = std::llround(std::abs(
                    a.total_time_s -
                    ramp_corrected_duration(trip, a.route, graph)));
                auto db = std::llround(std::abs(
                    b.total_time_s -
                    ramp_corrected_duration(trip, b.route, graph)));
                if (da != db) return da < db;
                auto ka = route_lex_key(a), kb = route_lex_key(b);
                if (ka != kb) return ka < kb;
                return a.edge_speeds_kmh(graph) < b.edge_speeds_kmh(graph);
              });
    if (seqs.size() > config.max_candidates_per_trip)
      seqs.resize(config.max_candidates_per_trip);
    work.push_back({&trip, std::move(seqs), 0.0});
  }
  if (work.empty()) return result;

  // Fewest-candidates-first ordering pins unambiguous trips early.
  std::sort(work.begin(), work.end(),
            [](const TripCandidates& a, const TripCandidates& b) {
              if (a.sequences.size() != b.sequences.size())
                return a.sequences.size() < b.sequences.size();
              return trip_uid(a.trip->txn) < trip_uid(b.trip->txn);
            });

  RecoveryObjective tracker(config.alpha);
  std::size_t nodes_used = 0;
  bool exhausted = false;

  // Per-candidate route length and id-sequence keys, precomputed so the
  // incumbent tie-break costs almost nothing at equal-objective leaves.
  std::vector<std::vector<double>> cand_length(work.size());
  std::vector<std::vector<std::string>> cand_key(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) {
    for (const auto& seq : work[i].sequences) {
      cand_length[i].push_back(route_length(graph, seq.route));
      cand_key[i].push_back(route_lex_key(seq));
    }
  }

  std::vector<std::size_t> current(work.size(), 0);
  std::vector<std::size_t> best_choice;
  double best_objective = -1.0;
  double best_length = 0.0;
  double current_length = 0.0;

  auto lex_better_than_best = [&]() {
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (current[i] == best_choice[i]) continue;
      int cmp = cand_key[i][current[i]].compare(cand_key[i][best_choice[i]]);
      if (cmp != 0) return cmp < 0;
    }
    return false;
  };

  std::function<void(std::size_t)> dfs = [&](std::size_t depth) {
    if (exhausted) return;
    if (depth == work.size()) {
      double obj = tracker.objective();
      bool better = false;
      if (obj > best_objective) {
        better = true;
      } else if (obj == best_objective &&
                 (current_length < best_length - 1e-9 ||
                  (current_length <= best_length + 1e-9 &&
                   lex_better_than_best()))) {
        better = true;
      }
      if (better) {
        best_objective = obj;
        best_choice = current;
        best_length = current_length;
      }
      return;
    }
    auto& tc = work[depth];
    const std::string& vehicle = tc.trip->txn.vehicle_id;

    // Greedy candidate order on the first visit of this depth: score each
    // candidate against the partial assignment.
    std::vector<std::size_t> order(tc.sequences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (best_choice.empty() && tc.sequences.size() > 1) {
      std::vector<std::pair<double, std::size_t>> scored;
      for (std::size_t i = 0; i < tc.sequences.size(); ++i) {
        tracker.add(tc.sequences[i], vehicle, graph);
        scored.push_back({-tracker.objective(), i});
        tracker.remove(tc.sequences[i], vehicle, graph);
      }
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto& a, const auto& b) {
                         return a.first < b.first;
                       });
      for (std::size_t i = 0; i < scored.size(); ++i) order[i] = scored[i].second;
    }

    for (auto idx : order) {
      if (nodes_used >= config.node_budget) {
        exhausted = true;
        return;
      }
      ++nodes_used;
      current[depth] = idx;
      current_length += cand_length[depth][idx];
      tracker.add(tc.sequences[idx], vehicle, graph);
      dfs(depth + 1);
      tracker.remove(tc.sequences[idx], vehicle, graph);
      current_length -= cand_length[depth][idx];
      if (exhausted) return;
    }
  };
  dfs(0);

  result.budget_exhausted = exhausted;
  result.objective = best_objective;

  // Materialize the incumbent, refine speeds to the fine grid and report
  // the normality structure of the delivered sequences.
  RecoveryObjective final_tracker(config.alpha);
  for (std::size_t i = 0; i < work.size(); ++i) {
    StateSequence seq = work[i].sequences[best_choice.empty() ? 0 : best_choice[i]];
    refine_sequence(seq, *work[i].trip, graph, config.disc);
    final_tracker.add(seq, work[i].trip->txn.vehicle_id, graph);
    result.sequences[seq.trip_id] = std::move(seq);
  }
  result.reports = final_tracker.reports(config.alpha);
  std::sort(result.unrecoverable.begin(), result.unrecoverable.end());
  return result;
}

void save_recovered(std::ostream& out, const RecoveryResult& result) {
  out << "trip_id,route_edge_list,states\n";
  char buf[64];
  for (const auto& [tid, seq] : result.sequences) {
    out << tid << ',';
    for (std::size_t i = 0; i < seq.route.edges.size(); ++i) {
      if (i) out << '|';
      out << seq.route.edges[i];
    }
    out << ',';
    for (std::size_t i = 0; i < seq.states.size(); ++i) {
      const auto& st = seq.states[i];
      if (i) out << ';';
      std::snprintf(buf, sizeof(buf), "%d:%s#%d:%.1f", st.slot,
                    st.edge_id.c_str(), st.segment, st.speed_kmh);
      out << buf;
    }
    out << "\n";
  }
}

std::map<std::string, StateSequence> load_recovered(std::istream& in) {
  std::map<std::string, StateSequence> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    auto first = line.find(',');
    auto second = line.find(',', first + 1);
    if (first == std::string::npos || second == std::string::npos)
      throw std::invalid_argument("bad recovered-trip record");
    StateSequence seq;
    seq.trip_id = line.substr(0, first);
    std::stringstream rs(line.substr(first + 1, second - first - 1));
    std::string edge;
    while (std::getline(rs, edge, '|')) seq.route.edges.push_back(edge);
    std::stringstream ss(line.substr(second + 1));
    std::string state_text;
    while (std::getline(ss, state_text, ';')) {
      State st;
      auto c1 = state_text.find(':');
      auto c2 = state_text.find(':', c1 + 1);
      auto hash = state_text.find('#');
      st.slot = std::stoi(state_text.substr(0, c1));
      st.edge_id = state_text.substr(c1 + 1, hash - c1 - 1);
      st.segment = std::stoi(state_text.substr(hash + 1, c2 - hash - 1));
      st.speed_kmh = std::stod(state_text.substr(c2 + 1));
      seq.states.push_back(std::move(st));
    }
    out[seq.trip_id] = std::move(seq);
  }
  return out;
}

}  // namespace tollcast
