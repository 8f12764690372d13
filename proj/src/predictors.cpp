#include "tollcast/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tollcast/errors.hpp"

namespace tollcast {

namespace {

template <typename Map>
std::vector<std::pair<std::string, double>> top_k_normalized(const Map& counts,
                                                             int k) {
  double total = 0.0;
  for (const auto& [key, c] : counts) total += static_cast<double>(c);
  std::vector<std::pair<std::string, double>> items;
  for (const auto& [key, c] : counts)
    items.push_back({key, static_cast<double>(c) / total});
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  items.resize(std::min<std::size_t>(items.size(), k));
  while (static_cast<int>(items.size()) < k) items.push_back({"", 0.0});
  return items;
}

int vtype_code(VehicleType t) { return static_cast<int>(t); }
int weather_code(Weather w) { return static_cast<int>(w); }

// Mondrian split rates scale with a dimension's extent, so numeric features
// are brought to unit-ish range to keep them comparable with one-hot dims.
constexpr double kSlotScale = 8.0;   // extent ~6: the daily profile needs depth
constexpr double kSpeedScale = 50.0;  // extent ~1.4 across typical speeds
constexpr double kTripCountScale = 100.0;
constexpr double kSavedTimeScale = 600.0;

}  // namespace

DestinationFeatures extract_destination_features(
    const VehicleProfile* profile, const Transaction& entry,
    const CrowdTables& tables, const ContextRecord& ctx,
    const PredictorConfig& cfg) {
  DestinationFeatures f;
  f.origin = entry.entry_station;
  f.entry_slot = slot_of(entry.entry_time, cfg.slot_width_min).index;
  f.vehicle_type = entry.vehicle_type;
  f.day_of_week = ctx.day_of_week;
  f.is_weekend = ctx.is_weekend;
  f.is_holiday = ctx.is_holiday;

  if (profile && !profile->dest_counts.empty()) {
    f.historical_top = top_k_normalized(profile->dest_counts, cfg.hist_top_k);
    f.trip_count = static_cast<double>(profile->trip_count);
  } else {
    for (int i = 0; i < cfg.hist_top_k; ++i) f.historical_top.push_back({"", 0.0});
  }

  auto it = tables.dest_dist.find({f.origin, f.entry_slot});
  if (it != tables.dest_dist.end()) {
    std::map<std::string, std::int64_t> scaled;
    for (const auto& [dest, p] : it->second)
      scaled[dest] = static_cast<std::int64_t>(p * 1e9);
    f.crowd_top = top_k_normalized(scaled, cfg.crowd_top_k);
  } else {
    // quiet slot: back off to the origin's whole-day crowd distribution
    std::map<std::string, std::int64_t> agg;
    for (const auto& [key, dist] : tables.dest_dist) {
      if (key.first != f.origin) continue;
      for (const auto& [dest, p] : dist)
        agg[dest] += static_cast<std::int64_t>(p * 1e9);
    }
    if (!agg.empty()) {
      f.crowd_top = top_k_normalized(agg, cfg.crowd_top_k);
    } else {
      for (int i = 0; i < cfg.crowd_top_k; ++i)
        f.crowd_top.push_back({"", 0.0});
    }
  }
  return f;
}

RouteFeatures extract_route_features(const VehicleProfile* profile,
                                     const std::string& origin,
                                     const std::string& destination,
                                     std::size_t candidate_count,
                                     Timestamp when, const CrowdTables& tables,
                                     const ContextRecord& ctx,
                                     const HighwayGraph& graph,
                                     std::span<const Route> candidates,
                                     const PredictorConfig& cfg) {
  RouteFeatures f;
  f.origin = origin;
  f.destination = destination;
  f.entry_slot = slot_of(when, cfg.slot_width_min).index;
  f.day_of_week = ctx.day_of_week;
  int labels = cfg.max_route_labels;
  f.hist_route_freq.assign(labels, 0.0);
  f.crowd_route_prob.assign(labels, 0.0);
  f.recent_speed_kmh.assign(labels, 0.0);

  if (profile) {
    f.highway_trip_frequency = static_cast<double>(profile->trip_count);
    if (profile->saved_time_n > 0) {
      f.saved_time_s = profile->saved_time_sum / profile->saved_time_n;
      f.saved_time_missing = false;
    }
    auto it = profile->route_counts.find({origin, destination});
    if (it != profile->route_counts.end()) {
      double total = 0.0;
      for (const auto& [idx, c] : it->second) total += c;
      for (const auto& [idx, c] : it->second)
        if (idx < labels) f.hist_route_freq[idx] = c / total;
    }
  }
  auto cit = tables.route_dist.find({origin, destination, f.entry_slot});
  if (cit != tables.route_dist.end()) {
    for (const auto& [idx, p] : cit->second)
      if (idx < labels) f.crowd_route_prob[idx] = p;
  }
  // Traffic context: previous slot's crowd median averaged over the
  // candidate's edges.
  int slots = kMinutesPerDay / cfg.slot_width_min;
  int prev_slot = (f.entry_slot + slots - 1) % slots;
  for (std::size_t i = 0; i < candidates.size() &&
                          i < static_cast<std::size_t>(labels);
       ++i) {
    double sum = 0.0;
    for (const auto& edge_id : candidates[i].edges)
      sum += tables.speed_map.letter_values_or_fallback(graph, edge_id,
                                                        prev_slot)
                 .median;
    f.recent_speed_kmh[i] = sum / candidates[i].edges.size();
  }
  (void)candidate_count;
  return f;
}

SpeedFeatures extract_speed_features(const VehicleProfile* profile,
                                     VehicleType type,
                                     const std::string& edge_id, Timestamp when,
                                     const CrowdTables& tables,
                                     const ContextRecord& ctx,
                                     const HighwayGraph& graph,
                                     const PredictorConfig& cfg) {
  SpeedFeatures f;
  f.vehicle_type = type;
  f.slot = slot_of(when, cfg.slot_width_min).index;
  f.is_weekend = ctx.is_weekend;
  f.weather = ctx.weather;
  if (profile && profile->speed_n > 0) {
    f.hist_mean_speed_kmh = profile->mean_speed_kmh();
    f.has_history = true;
  }
  const auto* cell = tables.speed_map.find(edge_id, f.slot);
  f.crowd = tables.speed_map.letter_values_or_fallback(graph, edge_id, f.slot);
  f.crowd_fallback = cell == nullptr || cell->fallback;
  return f;
}

int PredictorBundle::station_code(const std::string& id) const {
  if (id.empty()) return 0;
  return static_cast<int>(graph_.station_index(id)) + 1;
}

FeatureSchema PredictorBundle::destination_schema() const {
  FeatureSchema s;
  for (int i = 0; i < cfg_.hist_top_k; ++i)
    s.numeric.push_back("hist_freq_" + std::to_string(i + 1));
  for (int i = 0; i < cfg_.crowd_top_k; ++i)
    s.numeric.push_back("crowd_prob_" + std::to_string(i + 1));
  s.numeric.push_back("entry_slot");
  s.numeric.push_back("trip_count");
  int stations = static_cast<int>(graph_.stations().size()) + 1;
  s.categorical.push_back({"origin", stations});
  for (int i = 0; i < cfg_.hist_top_k; ++i)
    s.categorical.push_back({"hist_dest_" + std::to_string(i + 1), stations});
  for (int i = 0; i < cfg_.crowd_top_k; ++i)
    s.categorical.push_back({"crowd_dest_" + std::to_string(i + 1), stations});
  s.categorical.push_back({"vehicle_type", 3});
  s.categorical.push_back({"day_of_week", 7});
  s.categorical.push_back({"is_weekend", 2});
  s.categorical.push_back({"is_holiday", 2});
  return s;
}

FeatureVector PredictorBundle::encode_destination(
    const DestinationFeatures& f) const {
  FeatureVector x;
  for (const auto& [dest, freq] : f.historical_top) x.numeric.push_back(freq);
  for (const auto& [dest, p] : f.crowd_top) x.numeric.push_back(p);
  x.numeric.push_back(f.entry_slot / kSlotScale);
  x.numeric.push_back(std::min(1.0, f.trip_count / kTripCountScale));
  x.categorical.push_back(station_code(f.origin));
  for (const auto& [dest, freq] : f.historical_top)
    x.categorical.push_back(station_code(dest));
  for (const auto& [dest, p] : f.crowd_top)
    x.categorical.push_back(station_code(dest));
  x.categorical.push_back(vtype_code(f.vehicle_type));
  x.categorical.push_back(f.day_of_week - 1);
  x.categorical.push_back(f.is_weekend ? 1 : 0);
  x.categorical.push_back(f.is_holiday ? 1 : 0);
  return x;
}

FeatureSchema PredictorBundle::route_schema() const {
  FeatureSchema s;
  int labels = cfg_.max_route_labels;
  for (int i = 0; i < labels; ++i)
    s.numeric.push_back("hist_route_freq_" + std::to_string(i));
  for (int i = 0; i < labels; ++i)
    s.numeric.push_back("crowd_route_prob_" + std::to_string(i));
  for (int i = 0; i < labels; ++i)
    s.numeric.push_back("recent_speed_" + std::to_string(i));
  s.numeric.push_back("highway_trip_frequency");
  s.numeric.push_back("saved_time_s");
  s.numeric.push_back("entry_slot");
  int stations = static_cast<int>(graph_.stations().size()) + 1;
  s.categorical.push_back({"origin", stations});
  s.categorical.push_back({"destination", stations});
  s.categorical.push_back({"day_of_week", 7});
  s.categorical.push_back({"saved_time_missing", 2});
  return s;
}

FeatureVector PredictorBundle::encode_route(const RouteFeatures& f) const {
  FeatureVector x;
  for (double v : f.hist_route_freq) x.numeric.push_back(v);
  for (double v : f.crowd_route_prob) x.numeric.push_back(v);
  for (double v : f.recent_speed_kmh) x.numeric.push_back(v / kSpeedScale);
  x.numeric.push_back(std::min(1.0, f.highway_trip_frequency / kTripCountScale));
  x.numeric.push_back(std::clamp(f.saved_time_s / kSavedTimeScale, -1.0, 1.0));
  x.numeric.push_back(f.entry_slot / kSlotScale);
  x.categorical.push_back(station_code(f.origin));
  x.categorical.push_back(station_code(f.destination));
  x.categorical.push_back(f.day_of_week - 1);
  x.categorical.push_back(f.saved_time_missing ? 1 : 0);
  return x;
}

FeatureSchema PredictorBundle::speed_schema() const {
  FeatureSchema s;
  s.numeric = {"hist_mean_speed", "slot",        "crowd_min", "crowd_lf",
               "crowd_median",    "crowd_uf",    "crowd_max"};
  s.categorical.push_back({"vehicle_type", 3});
  s.categorical.push_back({"is_weekend", 2});
  s.categorical.push_back({"weather", 3});
  s.categorical.push_back({"has_history", 2});
  s.categorical.push_back({"crowd_fallback", 2});
  return s;
}

FeatureVector PredictorBundle::encode_speed(const SpeedFeatures& f) const {
  FeatureVector x;
  x.numeric = {f.hist_mean_speed_kmh / kSpeedScale,
               f.slot / kSlotScale,
               f.crowd.min / kSpeedScale,
               f.crowd.lower_fourth / kSpeedScale,
               f.crowd.median / kSpeedScale,
               f.crowd.upper_fourth / kSpeedScale,
               f.crowd.max / kSpeedScale};
  x.categorical.push_back(vtype_code(f.vehicle_type));
  x.categorical.push_back(f.is_weekend ? 1 : 0);
  x.categorical.push_back(weather_code(f.weather));
  x.categorical.push_back(f.has_history ? 1 : 0);
  x.categorical.push_back(f.crowd_fallback ? 1 : 0);
  return x;
}

void PredictorBundle::apply_trip_to_profile(VehicleProfile& p, const Trip& trip,
                                            const StateSequence* seq) {
  p.type = trip.txn.vehicle_type;
  p.dest_counts[trip.txn.exit_station] += 1;
  p.trip_count += 1;
  auto key = std::make_tuple(trip.txn.entry_station, trip.txn.exit_station,
                             trip.origin_slot.index);
  auto dit = tables_.od_duration.find(key);
  if (dit != tables_.od_duration.end() && dit->second.second > 1) {
    p.saved_time_sum += dit->second.first - trip.duration_s;
    p.saved_time_n += 1;
  }
  if (seq) {
    p.speed_sum += seq->mean_speed_kmh(graph_);
    p.speed_n += 1;
    auto candidates =
        enumerate_routes(graph_, trip.txn.entry_station,
                         trip.txn.exit_station, cfg_.max_route_edges);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i] == seq->route) {
        p.route_counts[{trip.txn.entry_station, trip.txn.exit_station}]
                      [static_cast<int>(i)] += 1;
        break;
      }
    }
  }
}

PredictorBundle PredictorBundle::train(
    std::span<const Trip> trips,
    const std::map<std::string, StateSequence>& recovered,
    const CrowdSpeedMap& speed_map, const HighwayGraph& graph,
    const ContextCalendar& calendar, const PredictorConfig& cfg) {
  if (trips.empty()) throw std::invalid_argument("empty training window");
  PredictorBundle bundle;
  bundle.graph_ = graph;
  bundle.calendar_ = calendar;
  bundle.cfg_ = cfg;
  bundle.tables_.speed_map = speed_map;

  std::vector<const Trip*> order;
  for (const auto& t : trips) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const Trip* a, const Trip* b) {
    if (a->txn.entry_time != b->txn.entry_time)
      return a->txn.entry_time < b->txn.entry_time;
    return a->txn.vehicle_id < b->txn.vehicle_id;
  });
  bundle.window_start_day_ = day_number(order.front()->txn.entry_time);
  bundle.window_end_day_ = day_number(order.back()->txn.entry_time);

  // Crowd tables frozen from the window.
  std::map<std::pair<std::string, int>, std::map<std::string, std::int64_t>>
      dest_counts;
  std::map<std::tuple<std::string, std::string, int>,
           std::map<int, std::int64_t>>
      route_counts;
  for (const Trip* t : order) {
    int slot = slot_of(t->txn.entry_time, cfg.slot_width_min).index;
    dest_counts[{t->txn.entry_station, slot}][t->txn.exit_station] += 1;
    auto& dur = bundle.tables_.od_duration[{t->txn.entry_station,
                                            t->txn.exit_station, slot}];
    dur.first += t->duration_s;
    dur.second += 1;
    auto rit = recovered.find(trip_uid(t->txn));
    if (rit != recovered.end()) {
      auto candidates = enumerate_routes(graph, t->txn.entry_station,
                                         t->txn.exit_station,
                                         cfg.max_route_edges);
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i] == rit->second.route) {
          route_counts[{t->txn.entry_station, t->txn.exit_station, slot}]
                      [static_cast<int>(i)] += 1;
          break;
        }
      }
    }
  }
  for (auto& [key, dur] : bundle.tables_.od_duration)
    dur.first /= static_cast<double>(dur.second);
  for (const auto& [key, counts] : dest_counts) {
    double total = 0.0;
    for (const auto& [dest, c] : counts) total += c;
    for (const auto& [dest, c] : counts)
      bundle.tables_.dest_dist[key][dest] = c / total;
  }
  for (const auto& [key, counts] : route_counts) {
    double total = 0.0;
    for (const auto& [idx, c] : counts) total += c;
    for (const auto& [idx, c] : counts)
      bundle.tables_.route_dist[key][idx] = c / total;
  }

  bundle.d_forest_.emplace(bundle.destination_schema(),
                           ForestTask::Classification, cfg.trees, cfg.seed);
  bundle.r_forest_.emplace(bundle.route_schema(), ForestTask::Classification,
                           cfg.trees, cfg.seed + 1);
  bundle.s_forest_.emplace(bundle.speed_schema(), ForestTask::Regression,
                           cfg.trees, cfg.seed + 2);

  // Single chronological pass of online updates; individual features always
  // reflect the state before the trip being learned.
  for (const Trip* t : order) {
    ContextRecord ctx = calendar.at_time(t->txn.entry_time);
    VehicleProfile* profile = nullptr;
    auto pit = bundle.profiles_.find(t->txn.vehicle_id);
    if (pit != bundle.profiles_.end()) profile = &pit->second;

    auto df = extract_destination_features(profile, t->txn, bundle.tables_,
                                           ctx, cfg);
    bundle.d_forest_->update(bundle.encode_destination(df),
                             t->txn.exit_station);

    const StateSequence* seq = nullptr;
    auto rit = recovered.find(trip_uid(t->txn));
    if (rit != recovered.end()) {
      seq = &rit->second;
      auto candidates = enumerate_routes(graph, t->txn.entry_station,
                                         t->txn.exit_station,
                                         cfg.max_route_edges);
      int route_idx = -1;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i] == seq->route) {
          route_idx = static_cast<int>(i);
          break;
        }
      }
      if (route_idx >= 0) {
        auto rf = extract_route_features(
            profile, t->txn.entry_station, t->txn.exit_station,
            candidates.size(), t->txn.entry_time, bundle.tables_, ctx, graph,
            candidates, cfg);
        bundle.r_forest_->update(bundle.encode_route(rf),
                                 std::to_string(route_idx));
      }

      auto speeds = seq->edge_speeds_kmh(graph);
      double cum = 0.0;
      for (std::size_t i = 0; i < seq->route.edges.size(); ++i) {
        Timestamp edge_entry =
            t->txn.entry_time + static_cast<Timestamp>(std::llround(cum));
        auto sf = extract_speed_features(profile, t->txn.vehicle_type,
                                         seq->route.edges[i], edge_entry,
                                         bundle.tables_, ctx, graph, cfg);
        bundle.s_forest_->update(bundle.encode_speed(sf), speeds[i]);
        cum += graph.edge(seq->route.edges[i]).length_m / (speeds[i] / 3.6);
      }
    }

    bundle.apply_trip_to_profile(bundle.profiles_[t->txn.vehicle_id], *t, seq);
  }
  return bundle;
}

const VehicleProfile* PredictorBundle::profile(
    const std::string& vehicle_id) const {
  auto it = profiles_.find(vehicle_id);
  return it == profiles_.end() ? nullptr : &it->second;
}

std::string PredictorBundle::predict_destination(const std::string& vehicle_id,
                                                 const std::string& origin,
                                                 Timestamp t) const {
  if (!graph_.has_station(origin))
    throw IdentifierError("unknown station " + origin);
  const VehicleProfile* prof = profile(vehicle_id);
  Transaction entry;
  entry.vehicle_id = vehicle_id;
  entry.vehicle_type = prof ? prof->type : VehicleType::Car;
  entry.entry_station = origin;
  entry.entry_time = t;
  ContextRecord ctx = calendar_.at_time(t);
  auto f = extract_destination_features(prof, entry, tables_, ctx, cfg_);
  auto posterior = d_forest_->predict_class(encode_destination(f));
  // best routable destination: Algorithm 1 hands the answer to the route
  // head, so stations without a candidate route are masked out
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [dest, p] : posterior)
    if (dest != origin) ranked.push_back({-p, dest});
  std::sort(ranked.begin(), ranked.end());
  for (const auto& [neg_p, dest] : ranked) {
    if (!graph_.has_station(dest)) continue;
    if (!enumerate_routes(graph_, origin, dest, cfg_.max_route_edges).empty())
      return dest;
  }
  return ranked.empty() ? std::string() : ranked.front().second;
}

Route PredictorBundle::predict_route(const std::string& vehicle_id,
                                     const std::string& origin,
                                     const std::string& destination,
                                     Timestamp t) const {
  auto candidates =
      enumerate_routes(graph_, origin, destination, cfg_.max_route_edges);
  if (candidates.empty())
    throw std::invalid_argument("no route between " + origin + " and " +
                                destination);
  if (candidates.size() == 1) return candidates.front();
  const VehicleProfile* prof = profile(vehicle_id);
  ContextRecord ctx = calendar_.at_time(t);
  auto f = extract_route_features(prof, origin, destination, candidates.size(),
                                  t, tables_, ctx, graph_, candidates, cfg_);
  auto posterior = r_forest_->predict_class(encode_route(f));
  int best_idx = 0;
  double best_p = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto it = posterior.find(std::to_string(i));
    double p = it == posterior.end() ? 0.0 : it->second;
    if (p > best_p) {
      best_p = p;
      best_idx = static_cast<int>(i);
    }
  }
  return candidates[best_idx];
}

double PredictorBundle::predict_speed(const std::string& vehicle_id,
                                      const std::string& edge_id,
                                      Timestamp t) const {
  const VehicleProfile* prof = profile(vehicle_id);
  ContextRecord ctx = calendar_.at_time(t);
  auto f = extract_speed_features(prof, prof ? prof->type : VehicleType::Car,
                                  edge_id, t, tables_, ctx, graph_, cfg_);
  return s_forest_->predict_value(encode_speed(f)).mean;
}

std::string PredictorBundle::emp_destination(const std::string& vehicle_id,
                                             const std::string& origin,
                                             Timestamp t) const {
  const VehicleProfile* prof = profile(vehicle_id);
  if (prof && !prof->dest_counts.empty()) {
    std::string best;
    std::int64_t best_c = -1;
    for (const auto& [dest, c] : prof->dest_counts) {
      if (c > best_c) {
        best_c = c;
        best = dest;
      }
    }
    return best;
  }
  int slot = slot_of(t, cfg_.slot_width_min).index;
  auto it = tables_.dest_dist.find({origin, slot});
  if (it == tables_.dest_dist.end()) {
    // crowd mode across all slots of this origin
    std::map<std::string, double> agg;
    for (const auto& [key, dist] : tables_.dest_dist) {
      if (key.first != origin) continue;
      for (const auto& [dest, p] : dist) agg[dest] += p;
    }
    std::string best;
    double best_p = -1.0;
    for (const auto& [dest, p] : agg) {
      if (p > best_p) {
        best_p = p;
        best = dest;
      }
    }
    return best;
  }
  std::string best;
  double best_p = -1.0;
  for (const auto& [dest, p] : it->second) {
    if (p > best_p) {
      best_p = p;
      best = dest;
    }
  }
  return best;
}

Route PredictorBundle::emp_route(const std::string& vehicle_id,
                                 const std::string& origin,
                                 const std::string& destination,
                                 Timestamp t) const {
  auto candidates =
      enumerate_routes(graph_, origin, destination, cfg_.max_route_edges);
  if (candidates.empty())
    throw std::invalid_argument("no route between " + origin + " and " +
                                destination);
  const VehicleProfile* prof = profile(vehicle_id);
  if (prof) {
    auto it = prof->route_counts.find({origin, destination});
    if (it != prof->route_counts.end() && !it->second.empty()) {
      int best_idx = 0;
      std::int64_t best_c = -1;
      for (const auto& [idx, c] : it->second) {
        if (c > best_c && idx < static_cast<int>(candidates.size())) {
          best_c = c;
          best_idx = idx;
        }
      }
      return candidates[best_idx];
    }
  }
  int slot = slot_of(t, cfg_.slot_width_min).index;
  auto cit = tables_.route_dist.find({origin, destination, slot});
  if (cit != tables_.route_dist.end() && !cit->second.empty()) {
    int best_idx = 0;
    double best_p = -1.0;
    for (const auto& [idx, p] : cit->second) {
      if (p > best_p && idx < static_cast<int>(candidates.size())) {
        best_p = p;
        best_idx = idx;
      }
    }
    return candidates[best_idx];
  }
  return candidates.front();
}

double PredictorBundle::emp_speed(const std::string& vehicle_id,
                                  const std::string& edge_id,
                                  Timestamp t) const {
  const VehicleProfile* prof = profile(vehicle_id);
  if (prof && prof->speed_n > 0) return prof->mean_speed_kmh();
  int slot = slot_of(t, cfg_.slot_width_min).index;
  return tables_.speed_map.letter_values_or_fallback(graph_, edge_id, slot)
      .median;
}

EmpPrediction PredictorBundle::emp_baseline(const std::string& vehicle_id,
                                            const std::string& origin,
                                            Timestamp t) const {
  EmpPrediction pred;
  pred.destination = emp_destination(vehicle_id, origin, t);
  if (!pred.destination.empty() && pred.destination != origin)
    pred.route = emp_route(vehicle_id, origin, pred.destination, t);
  if (!pred.route.edges.empty())
    pred.speed_kmh = emp_speed(vehicle_id, pred.route.edges.front(), t);
  return pred;
}

StateSequence PredictorBundle::recover_single_trip(const Trip& trip) const {
  auto candidates =
      enumerate_routes(graph_, trip.txn.entry_station, trip.txn.exit_station,
                       cfg_.max_route_edges);
  if (candidates.empty())
    throw std::invalid_argument("no route for feedback trip");
  DiscretizationConfig disc;
  auto seqs = candidate_state_sequences(trip, graph_, candidates, disc);
  if (seqs.empty()) {
    // Out-of-band duration: constant-speed profile on the shortest route.
    const Route& route = candidates.front();
    double corrected = ramp_corrected_duration(trip, route, graph_);
    double mean =
        (route_length(graph_, route) / 1000.0) / (corrected / 3600.0);
    std::vector<double> speeds;
    for (const auto& id : route.edges)
      speeds.push_back(std::clamp(mean, disc.speed_unit_kmh,
                                  graph_.edge(id).speed_limit_kmh * 1.3));
    return sequence_from_edge_speeds(trip, graph_, route, speeds, disc);
  }
  // Score candidates against the crowd speed map: length-weighted squared
  // deviation from the slot medians.
  int slots = kMinutesPerDay / cfg_.slot_width_min;
  (void)slots;
  double best_cost = std::numeric_limits<double>::max();
  std::size_t best = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto speeds = seqs[i].edge_speeds_kmh(graph_);
    double cost = 0.0;
    double cum = 0.0;
    for (std::size_t e = 0; e < seqs[i].route.edges.size(); ++e) {
      Timestamp edge_entry =
          trip.txn.entry_time + static_cast<Timestamp>(std::llround(cum));
      int slot = slot_of(edge_entry, cfg_.slot_width_min).index;
      double median =
          tables_.speed_map
              .letter_values_or_fallback(graph_, seqs[i].route.edges[e], slot)
              .median;
      double km = graph_.edge(seqs[i].route.edges[e]).length_m / 1000.0;
      cost += km * (speeds[e] - median) * (speeds[e] - median);
      cum += graph_.edge(seqs[i].route.edges[e]).length_m / (speeds[e] / 3.6);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return refine_to_fine_grid(seqs[best], trip, graph_, DiscretizationConfig{});
}

void PredictorBundle::feedback_update(const Transaction& completed) {
  std::string uid = trip_uid(completed);
  if (feedback_seen_.count(uid))
    throw std::invalid_argument("duplicate feedback for " + uid);
  feedback_seen_.insert(uid);

  Trip trip = make_trip(completed, cfg_.slot_width_min);
  ContextRecord ctx = calendar_.at_time(completed.entry_time);
  VehicleProfile* prof = nullptr;
  auto pit = profiles_.find(completed.vehicle_id);
  if (pit != profiles_.end()) prof = &pit->second;

  auto df = extract_destination_features(prof, completed, tables_, ctx, cfg_);
  d_forest_->update(encode_destination(df), completed.exit_station);

  StateSequence seq = recover_single_trip(trip);
  auto candidates =
      enumerate_routes(graph_, completed.entry_station, completed.exit_station,
                       cfg_.max_route_edges);
  int route_idx = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] == seq.route) {
      route_idx = static_cast<int>(i);
      break;
    }
  }
  auto rf = extract_route_features(prof, completed.entry_station,
                                   completed.exit_station, candidates.size(),
                                   completed.entry_time, tables_, ctx, graph_,
                                   candidates, cfg_);
  r_forest_->update(encode_route(rf), std::to_string(route_idx));

  // One speed update per feedback: the entry edge's recovered speed.
  auto speeds = seq.edge_speeds_kmh(graph_);
  auto sf = extract_speed_features(prof, completed.vehicle_type,
                                   seq.route.edges.front(),
                                   completed.entry_time, tables_, ctx, graph_,
                                   cfg_);
  s_forest_->update(encode_speed(sf), speeds.front());

  apply_trip_to_profile(profiles_[completed.vehicle_id], trip, &seq);
}

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, sep)) out.push_back(f);
  return out;
}

}  // namespace

void PredictorBundle::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/manifest.txt");
    out << "format=1\n";
    out << "window_start=" << format_date(window_start_day_) << "\n";
    out << "window_end=" << format_date(window_end_day_) << "\n";
    out << "seed=" << cfg_.seed << "\n";
    out << "config_hash=" << cfg_.config_hash << "\n";
    out << "slot_width_min=" << cfg_.slot_width_min << "\n";
    out << "hist_top_k=" << cfg_.hist_top_k << "\n";
    out << "crowd_top_k=" << cfg_.crowd_top_k << "\n";
    out << "trees=" << cfg_.trees << "\n";
    out << "max_route_edges=" << cfg_.max_route_edges << "\n";
    out << "max_route_labels=" << cfg_.max_route_labels << "\n";
  }
  graph_.save_file(dir + "/graph.csv");
  calendar_.save_file(dir + "/context.csv");
  tables_.speed_map.save_file(dir + "/speedmap.csv");
  d_forest_->save_file(dir + "/d_forest.json");
  r_forest_->save_file(dir + "/r_forest.json");
  s_forest_->save_file(dir + "/s_forest.json");
  {
    std::ofstream out(dir + "/crowd_dest.csv");
    out << "origin,slot,destination,probability\n";
    char buf[64];
    for (const auto& [key, dist] : tables_.dest_dist)
      for (const auto& [dest, p] : dist) {
        std::snprintf(buf, sizeof(buf), "%.9f", p);
        out << key.first << ',' << key.second << ',' << dest << ',' << buf
            << "\n";
      }
  }
  {
    std::ofstream out(dir + "/crowd_route.csv");
    out << "origin,destination,slot,route_index,probability\n";
    char buf[64];
    for (const auto& [key, dist] : tables_.route_dist)
      for (const auto& [idx, p] : dist) {
        std::snprintf(buf, sizeof(buf), "%.9f", p);
        out << std::get<0>(key) << ',' << std::get<1>(key) << ','
            << std::get<2>(key) << ',' << idx << ',' << buf << "\n";
      }
  }
  {
    std::ofstream out(dir + "/od_duration.csv");
    out << "origin,destination,slot,mean_duration_s,count\n";
    char buf[64];
    for (const auto& [key, md] : tables_.od_duration) {
      std::snprintf(buf, sizeof(buf), "%.3f", md.first);
      out << std::get<0>(key) << ',' << std::get<1>(key) << ','
          << std::get<2>(key) << ',' << buf << ',' << md.second << "\n";
    }
  }
  {
    std::ofstream out(dir + "/profiles.csv");
    out << "record,fields\n";
    char buf[128];
    for (const auto& [vid, p] : profiles_) {
      std::snprintf(buf, sizeof(buf), "meta,%s,%s,%lld,%.6f,%lld,%.6f,%lld\n",
                    vid.c_str(), to_string(p.type).c_str(),
                    static_cast<long long>(p.trip_count), p.speed_sum,
                    static_cast<long long>(p.speed_n), p.saved_time_sum,
                    static_cast<long long>(p.saved_time_n));
      out << buf;
      for (const auto& [dest, c] : p.dest_counts)
        out << "dest," << vid << ',' << dest << ',' << c << "\n";
      for (const auto& [od, counts] : p.route_counts)
        for (const auto& [idx, c] : counts)
          out << "route," << vid << ',' << od.first << ',' << od.second << ','
              << idx << ',' << c << "\n";
    }
  }
  {
    std::ofstream out(dir + "/feedback.csv");
    for (const auto& uid : feedback_seen_) out << uid << "\n";
  }
}

PredictorBundle PredictorBundle::load(const std::string& dir) {
  PredictorBundle bundle;
  {
    std::ifstream in(dir + "/manifest.txt");
    if (!in) throw std::runtime_error("cannot open bundle manifest in " + dir);
    std::string line;
    while (std::getline(in, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      if (key == "window_start") bundle.window_start_day_ = parse_date(value);
      else if (key == "window_end") bundle.window_end_day_ = parse_date(value);
      else if (key == "seed") bundle.cfg_.seed = std::stoull(value);
      else if (key == "config_hash") bundle.cfg_.config_hash = std::stoull(value);
      else if (key == "slot_width_min") bundle.cfg_.slot_width_min = std::stoi(value);
      else if (key == "hist_top_k") bundle.cfg_.hist_top_k = std::stoi(value);
      else if (key == "crowd_top_k") bundle.cfg_.crowd_top_k = std::stoi(value);
      else if (key == "trees") bundle.cfg_.trees = std::stoi(value);
      else if (key == "max_route_edges") bundle.cfg_.max_route_edges = std::stoi(value);
      else if (key == "max_route_labels") bundle.cfg_.max_route_labels = std::stoi(value);
    }
  }
  bundle.graph_ = HighwayGraph::load_file(dir + "/graph.csv");
  bundle.calendar_ = ContextCalendar::load_file(dir + "/context.csv");
  bundle.tables_.speed_map = CrowdSpeedMap::load_file(dir + "/speedmap.csv");
  bundle.d_forest_ = MondrianForest::load_file(dir + "/d_forest.json");
  bundle.r_forest_ = MondrianForest::load_file(dir + "/r_forest.json");
  bundle.s_forest_ = MondrianForest::load_file(dir + "/s_forest.json");
  {
    std::ifstream in(dir + "/crowd_dest.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      auto f = split_line(line, ',');
      if (f.size() != 4) continue;
      bundle.tables_.dest_dist[{f[0], std::stoi(f[1])}][f[2]] = std::stod(f[3]);
    }
  }
  {
    std::ifstream in(dir + "/crowd_route.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      auto f = split_line(line, ',');
      if (f.size() != 5) continue;
      bundle.tables_.route_dist[{f[0], f[1], std::stoi(f[2])}]
                               [std::stoi(f[3])] = std::stod(f[4]);
    }
  }
  {
    std::ifstream in(dir + "/od_duration.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      auto f = split_line(line, ',');
      if (f.size() != 5) continue;
      bundle.tables_.od_duration[{f[0], f[1], std::stoi(f[2])}] = {
          std::stod(f[3]), std::stoll(f[4])};
    }
  }
  {
    std::ifstream in(dir + "/profiles.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      auto f = split_line(line, ',');
      if (f.empty()) continue;
      if (f[0] == "meta" && f.size() == 8) {
        auto& p = bundle.profiles_[f[1]];
        p.type = *vehicle_type_from_string(f[2]);
        p.trip_count = std::stoll(f[3]);
        p.speed_sum = std::stod(f[4]);
        p.speed_n = std::stoll(f[5]);
        p.saved_time_sum = std::stod(f[6]);
        p.saved_time_n = std::stoll(f[7]);
      } else if (f[0] == "dest" && f.size() == 4) {
        bundle.profiles_[f[1]].dest_counts[f[2]] = std::stoll(f[3]);
      } else if (f[0] == "route" && f.size() == 6) {
        bundle.profiles_[f[1]].route_counts[{f[2], f[3]}][std::stoi(f[4])] =
            std::stoll(f[5]);
      }
    }
  }
  {
    std::ifstream in(dir + "/feedback.csv");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) bundle.feedback_seen_.insert(line);
  }
  return bundle;
}

}  // namespace tollcast
