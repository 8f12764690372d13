#include "tollcast/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tollcast {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, const std::string& tag) {
  std::uint64_t h = seed ^ 1469598103934665603ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Additive so that cell speed samples stay a Gaussian convolution across
// the population rather than a visible per-type mixture.
double type_shift_kmh(VehicleType t) {
  switch (t) {
    case VehicleType::Car: return 1.0;
    case VehicleType::Bus: return -2.0;
    case VehicleType::Truck: return -4.0;
  }
  return 0.0;
}

double congestion_factor(int slot30, double depth) {
  double h = (slot30 + 0.5) * 0.5;  // hour at the slot midpoint
  auto dip = [&](double peak) {
    double d = (h - peak) / 1.5;
    return std::exp(-0.5 * d * d);
  };
  // two daily peaks, 10 am and 6 pm
  return 1.0 - depth * dip(10.0) - depth * dip(18.0);
}

double weather_factor(Weather w) {
  return (w == Weather::Rain || w == Weather::HeavyRain) ? 0.9 : 1.0;
}

std::string station_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%03d", i + 1);
  return buf;
}

}  // namespace

double GroundTruthTrace::position_at(Timestamp t) const {
  if (t < entry_time || positions_m.empty()) return 0.0;
  std::size_t idx = static_cast<std::size_t>(t - entry_time);
  if (idx >= positions_m.size()) return positions_m.back();
  return positions_m[idx];
}

std::vector<double> GroundTruthTrace::edge_durations_s(
    const HighwayGraph& graph) const {
  std::vector<double> durations;
  durations.reserve(route.edges.size());
  for (std::size_t i = 0; i < route.edges.size(); ++i) {
    double len = graph.edge(route.edges[i]).length_m;
    durations.push_back(len / (edge_speeds_kmh[i] / 3.6));
  }
  return durations;
}

double World::latent_mean_kmh(std::size_t edge_index, int slot30,
                              const ContextRecord& ctx) const {
  double mean = edge_base_free_kmh[edge_index] *
                congestion_factor(slot30, config.congestion_depth) *
                weather_factor(ctx.weather);
  if (ctx.is_weekend) mean *= 1.05;
  double limit = graph.edges()[edge_index].speed_limit_kmh;
  return std::clamp(mean, 20.0, 1.25 * limit);
}

World generate_world(const SimConfig& config, std::uint64_t seed) {
  if (config.stations < 2)
    throw std::invalid_argument("world needs at least 2 stations");
  if (config.vehicles < 1)
    throw std::invalid_argument("world needs at least 1 vehicle");
  double frac_sum =
      config.frac_single + config.frac_commuter + config.frac_multi;
  if (std::abs(frac_sum - 1.0) > 1e-9)
    throw std::invalid_argument("entropy regime fractions must sum to 1");

  World world;
  world.config = config;
  std::mt19937_64 rng(mix_seed(seed, "world"));

  // Random connected layout: spanning tree plus extra links, every link
  // realized as a directed edge pair.
  int n = config.stations;
  std::vector<TollStation> stations;
  std::uniform_real_distribution<double> ramp_dist(config.ramp_min_m,
                                                   config.ramp_max_m);
  for (int i = 0; i < n; ++i) {
    double ramp = config.noise_free || config.ramp_max_m <= 0.0
                      ? 0.0
                      : ramp_dist(rng);
    stations.push_back({station_id(i), "Station " + std::to_string(i + 1),
                        ramp});
  }

  std::set<std::pair<int, int>> links;
  for (int i = 1; i < n; ++i) {
    int j = static_cast<int>(std::uniform_int_distribution<int>(0, i - 1)(rng));
    links.insert({std::min(i, j), std::max(i, j)});
  }
  std::size_t target_links = static_cast<std::size_t>(
      std::max<double>(n - 1, config.edge_density * n));
  std::size_t max_links = static_cast<std::size_t>(n) * (n - 1) / 2;
  target_links = std::min(target_links, max_links);
  std::uniform_int_distribution<int> pick(0, n - 1);
  while (links.size() < target_links) {
    int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    links.insert({std::min(a, b), std::max(a, b)});
  }

  std::vector<Edge> edges;
  std::uniform_real_distribution<double> len_dist(config.edge_min_m,
                                                  config.edge_max_m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int edge_counter = 0;
  for (const auto& [a, b] : links) {
    double len = len_dist(rng);
    double limit = unit(rng) < 0.4 ? 100.0 : 120.0;
    char id1[16], id2[16];
    std::snprintf(id1, sizeof(id1), "E%04d", ++edge_counter);
    std::snprintf(id2, sizeof(id2), "E%04d", ++edge_counter);
    edges.push_back({id1, station_id(a), station_id(b), len, limit});
    edges.push_back({id2, station_id(b), station_id(a), len, limit});
  }
  world.graph = HighwayGraph(std::move(stations), std::move(edges));

  world.edge_base_free_kmh.resize(world.graph.edges().size());
  for (std::size_t e = 0; e < world.graph.edges().size(); ++e) {
    double limit = world.graph.edges()[e].speed_limit_kmh;
    world.edge_base_free_kmh[e] =
        limit * std::uniform_real_distribution<double>(
                    config.base_free_min_frac, config.base_free_max_frac)(rng);
  }

  // Reachable destinations within the route-edge bound, for OD sampling.
  std::vector<std::vector<std::pair<int, int>>> reachable(n);  // (dest, hops)
  for (int s = 0; s < n; ++s) {
    std::vector<int> dist(n, -1);
    std::queue<int> q;
    q.push(s);
    dist[s] = 0;
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      if (dist[v] >= config.max_route_edges) continue;
      for (auto ei : world.graph.out_edges(v)) {
        int w = static_cast<int>(
            world.graph.station_index(world.graph.edges()[ei].to));
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
      }
    }
    for (int d = 0; d < n; ++d)
      if (d != s && dist[d] > 0) reachable[s].push_back({d, dist[d]});
  }
  bool any_od = false;
  for (int s = 0; s < n && !any_od; ++s) any_od = !reachable[s].empty();
  if (!any_od) throw std::invalid_argument("no feasible origin/destination demand");

  // Zipf-like station popularity: a few hubs carry most of the demand.
  std::vector<double> popularity(n);
  {
    std::vector<int> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng);
    for (int i = 0; i < n; ++i)
      popularity[i] = 1.0 / std::pow(rank[i] + 1.0, 1.1);
  }
  double pop_total = std::accumulate(popularity.begin(), popularity.end(), 0.0);

  auto sample_od = [&](std::mt19937_64& r) -> std::pair<int, int> {
    for (int attempt = 0; attempt < 256; ++attempt) {
      double pt = std::uniform_real_distribution<double>(0.0, pop_total)(r);
      int s = n - 1;
      double pacc = 0.0;
      for (int i = 0; i < n; ++i) {
        pacc += popularity[i];
        if (pacc >= pt) {
          s = i;
          break;
        }
      }
      if (reachable[s].empty()) continue;
      // favor near, popular destinations so most trips stay short
      double total = 0.0;
      for (const auto& [d, hops] : reachable[s])
        total += popularity[d] * std::pow(0.35, hops - 1);
      double t = std::uniform_real_distribution<double>(0.0, total)(r);
      double acc = 0.0;
      for (const auto& [d, hops] : reachable[s]) {
        acc += popularity[d] * std::pow(0.35, hops - 1);
        if (acc >= t) return {s, d};
      }
    }
    throw std::invalid_argument("no feasible origin/destination demand");
  };

  // Population with the configured entropy-regime mix.
  std::normal_distribution<double> offset_dist(0.0,
                                               config.personal_offset_sd_kmh);
  for (int v = 0; v < config.vehicles; ++v) {
    BehaviorProfile p;
    char vid[16];
    std::snprintf(vid, sizeof(vid), "V%05d", v + 1);
    p.vehicle_id = vid;
    double roll = unit(rng);
    p.entropy_regime = roll < config.frac_single
                           ? 0
                           : (roll < config.frac_single + config.frac_commuter
                                  ? 1
                                  : 2);
    double type_roll = unit(rng);
    p.type = config.noise_free
                 ? VehicleType::Car
                 : (type_roll < 0.75
                        ? VehicleType::Car
                        : (type_roll < 0.88 ? VehicleType::Bus
                                            : VehicleType::Truck));
    p.base_offset_kmh =
        config.noise_free
            ? 0.0
            : std::clamp(offset_dist(rng), -30.0, 30.0);
    p.stickiness = std::clamp(
        config.route_stickiness + 0.05 * (unit(rng) - 0.5), 0.0, 1.0);

    int n_ods = p.entropy_regime == 2
                    ? std::uniform_int_distribution<int>(3, 5)(rng)
                    : 1;
    for (int k = 0; k < n_ods; ++k) {
      auto [o, d] = sample_od(rng);
      p.od_prefs.push_back({station_id(o), station_id(d)});
      p.od_weights.push_back(p.entropy_regime == 2 ? unit(rng) + 0.2 : 1.0);
    }
    double wsum = std::accumulate(p.od_weights.begin(), p.od_weights.end(), 0.0);
    for (auto& w : p.od_weights) w /= wsum;

    for (int d = 0; d < 7; ++d) {
      if (p.entropy_regime == 0)
        p.weekday_activity[d] = 0.15;
      else if (p.entropy_regime == 1)
        p.weekday_activity[d] = d < 5 ? 0.9 : 0.25;
      else
        p.weekday_activity[d] = p.type == VehicleType::Truck ? 0.8 : 0.5;
    }
    world.population.push_back(std::move(p));
  }

  // Context calendar: deterministic weather draws, periodic holidays.
  std::mt19937_64 wrng(mix_seed(seed, "weather"));
  for (int d = 0; d < config.days; ++d) {
    ContextRecord rec;
    rec.day = config.start_day + d;
    double w = std::uniform_real_distribution<double>(0.0, 1.0)(wrng);
    if (w < config.heavy_rain_probability)
      rec.weather = Weather::HeavyRain;
    else if (w < config.heavy_rain_probability + config.rain_probability)
      rec.weather = Weather::Rain;
    else
      rec.weather = Weather::Clear;
    rec.is_holiday = config.holiday_every_n_days > 0 &&
                     (d % config.holiday_every_n_days) ==
                         config.holiday_every_n_days - 1;
    world.calendar.add(rec);
  }
  return world;
}

namespace {

struct PlannedTrip {
  const BehaviorProfile* profile;
  std::string origin;
  std::string destination;
  Timestamp entry;
};

/// Realizes one trip: per-edge speeds drawn from the latent slot means at
/// edge-entry time, ramps traversed at the adjacent edge speed.
bool realize_trip(const World& world, const PlannedTrip& plan,
                  std::mt19937_64& rng, Transaction& txn,
                  GroundTruthTrace& trace) {
  const auto& cfg = world.config;
  auto candidates = enumerate_routes(world.graph, plan.origin,
                                     plan.destination, cfg.max_route_edges);
  if (candidates.empty()) return false;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t pick = 0;
  if (candidates.size() > 1 && unit(rng) >= plan.profile->stickiness) {
    double shortest = route_length(world.graph, candidates.front());
    std::vector<double> weights;
    double total = 0.0;
    for (const auto& candidate : candidates) {
      double detour = route_length(world.graph, candidate) / shortest - 1.0;
      weights.push_back(std::exp(-cfg.detour_sensitivity * detour));
      total += weights.back();
    }
    double t = unit(rng) * total;
    double acc = 0.0;
    pick = candidates.size() - 1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (acc >= t) {
        pick = i;
        break;
      }
    }
  }
  const Route& route = candidates[pick];

  ContextRecord ctx = world.calendar.at_time(plan.entry);
  std::normal_distribution<double> noise(0.0, cfg.speed_noise_sd_kmh);

  double t = 0.0;  // seconds since entry
  std::vector<double> speeds;
  std::vector<double> durations;
  double entry_ramp = world.graph.station(plan.origin).ramp_length_m;
  double exit_ramp = world.graph.station(plan.destination).ramp_length_m;
  for (std::size_t i = 0; i < route.edges.size(); ++i) {
    std::size_t eidx = world.graph.edge_index(route.edges[i]);
    const Edge& e = world.graph.edges()[eidx];
    Timestamp edge_entry =
        plan.entry + static_cast<Timestamp>(std::llround(t));
    int slot30 = slot_of(edge_entry, kLatentSlotWidthMin).index;
    double v = world.latent_mean_kmh(eidx, slot30, ctx);
    if (!cfg.noise_free)
      v += type_shift_kmh(plan.profile->type) + plan.profile->base_offset_kmh +
           noise(rng);
    v = std::clamp(v, 20.0, 1.3 * e.speed_limit_kmh);
    if (i == 0 && entry_ramp > 0.0) t += entry_ramp / (v / 3.6);
    speeds.push_back(v);
    durations.push_back(e.length_m / (v / 3.6));
    t += durations.back();
  }
  if (exit_ramp > 0.0) t += exit_ramp / (speeds.back() / 3.6);
  if (cfg.rest_dwell_probability > 0.0 &&
      unit(rng) < cfg.rest_dwell_probability) {
    t += std::uniform_real_distribution<double>(300.0, 1200.0)(rng);
  }

  Timestamp exit_time = plan.entry + std::max<Timestamp>(1, std::llround(t));

  txn.vehicle_id = plan.profile->vehicle_id;
  txn.vehicle_type = plan.profile->type;
  txn.entry_station = plan.origin;
  txn.entry_time = plan.entry;
  txn.exit_station = plan.destination;
  txn.exit_time = exit_time;
  switch (plan.profile->type) {
    case VehicleType::Car:
      txn.axle_count = 2;
      txn.weight_kg = 1500;
      break;
    case VehicleType::Bus:
      txn.axle_count = 3;
      txn.weight_kg = 9000;
      break;
    case VehicleType::Truck:
      txn.axle_count = 2 + std::uniform_int_distribution<int>(1, 4)(rng);
      txn.weight_kg = 12000 + 2000 * txn.axle_count;
      break;
  }

  trace.vehicle_id = txn.vehicle_id;
  trace.route = route;
  trace.entry_time = plan.entry;
  trace.exit_time = exit_time;
  trace.edge_speeds_kmh = speeds;
  trace.txn = txn;

  // Per-second along-route positions: 0 on the entry ramp, route length on
  // the exit ramp, linear in between.
  double total_len = route_length(world.graph, route);
  double ramp_in_s = entry_ramp > 0.0 ? entry_ramp / (speeds.front() / 3.6) : 0.0;
  std::vector<double> cum_time{0.0};
  std::vector<double> cum_len{0.0};
  for (std::size_t i = 0; i < durations.size(); ++i) {
    cum_time.push_back(cum_time.back() + durations[i]);
    cum_len.push_back(cum_len.back() +
                      world.graph.edge(route.edges[i]).length_m);
  }
  std::size_t seconds = static_cast<std::size_t>(exit_time - plan.entry) + 1;
  trace.positions_m.resize(seconds);
  for (std::size_t s = 0; s < seconds; ++s) {
    double drive_t = static_cast<double>(s) - ramp_in_s;
    double pos;
    if (drive_t <= 0) {
      pos = 0.0;
    } else if (drive_t >= cum_time.back()) {
      pos = total_len;
    } else {
      auto it = std::upper_bound(cum_time.begin(), cum_time.end(), drive_t);
      std::size_t k = static_cast<std::size_t>(it - cum_time.begin()) - 1;
      double frac = (drive_t - cum_time[k]) / durations[k];
      pos = cum_len[k] + frac * (cum_len[k + 1] - cum_len[k]);
    }
    trace.positions_m[s] = pos;
  }
  return true;
}

}  // namespace

SimOutput simulate_days(const World& world, int days, std::uint64_t seed) {
  const auto& cfg = world.config;
  if (days > cfg.days)
    throw std::invalid_argument("simulate_days exceeds the world calendar");
  SimOutput out;

  for (int d = 0; d < days; ++d) {
    std::int64_t day = cfg.start_day + d;
    const ContextRecord* ctx = world.calendar.find(day);
    int dow = day_of_week(day);
    Timestamp midnight = day * kSecondsPerDay;

    for (const auto& profile : world.population) {
      std::mt19937_64 rng(
          mix_seed(seed, profile.vehicle_id + "#" + std::to_string(day)));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<PlannedTrip> plans;
      bool holiday = ctx && ctx->is_holiday;

      auto pick_od = [&]() {
        double t = unit(rng);
        double acc = 0.0;
        for (std::size_t k = 0; k < profile.od_prefs.size(); ++k) {
          acc += profile.od_weights[k];
          if (t <= acc) return profile.od_prefs[k];
        }
        return profile.od_prefs.back();
      };
      auto scrambled_od = [&]() {
        // holiday behavior: both endpoints drawn afresh near the home origin
        auto base = pick_od();
        const auto& stations = world.graph.stations();
        for (int attempt = 0; attempt < 16; ++attempt) {
          const auto& s = stations[std::uniform_int_distribution<std::size_t>(
              0, stations.size() - 1)(rng)];
          if (s.id != base.first &&
              !enumerate_routes(world.graph, base.first, s.id,
                                cfg.max_route_edges)
                   .empty())
            return std::make_pair(base.first, s.id);
        }
        return base;
      };

      double activity = profile.weekday_activity[dow - 1];
      if (profile.entropy_regime == 1 && !holiday) {
        bool weekday = dow <= 5;
        if (unit(rng) < activity) {
          double h = std::clamp(
              std::normal_distribution<double>(7.5, 0.75)(rng), 5.0, 11.0);
          auto od = profile.od_prefs.front();
          plans.push_back({&profile, od.first, od.second,
                           midnight + static_cast<Timestamp>(h * 3600)});
        }
        if (unit(rng) < activity) {
          double h = std::clamp(
              std::normal_distribution<double>(18.0, 0.75)(rng), 13.0, 22.5);
          auto od = profile.od_prefs.front();
          // evening leg runs the reverse direction
          plans.push_back({&profile, od.second, od.first,
                           midnight + static_cast<Timestamp>(h * 3600)});
        }
        if (!weekday && plans.size() > 1) plans.pop_back();
      } else {
        int n_trips = 0;
        if (profile.entropy_regime == 0) {
          n_trips = unit(rng) < activity ? 1 : 0;
        } else {
          double lambda = profile.type == VehicleType::Truck ? 2.0 : 1.2;
          if (unit(rng) < activity)
            n_trips = std::min(
                3, static_cast<int>(std::poisson_distribution<int>(lambda)(rng)));
        }
        for (int k = 0; k < n_trips; ++k) {
          auto od = holiday && profile.entropy_regime != 0 && unit(rng) < 0.5
                        ? scrambled_od()
                        : pick_od();
          double h = 6.0 + 16.0 * unit(rng);
          plans.push_back({&profile, od.first, od.second,
                           midnight + static_cast<Timestamp>(h * 3600)});
        }
      }

      std::sort(plans.begin(), plans.end(),
                [](const PlannedTrip& a, const PlannedTrip& b) {
                  return a.entry < b.entry;
                });
      Timestamp busy_until = 0;
      for (const auto& plan : plans) {
        if (plan.entry < busy_until + 600) continue;  // still on the road
        Transaction txn;
        GroundTruthTrace trace;
        if (!realize_trip(world, plan, rng, txn, trace)) continue;
        busy_until = txn.exit_time;
        out.transactions.push_back(std::move(txn));
        out.traces.push_back(std::move(trace));
      }
    }
  }

  std::vector<std::size_t> order(out.transactions.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = out.transactions[a];
    const auto& tb = out.transactions[b];
    if (ta.entry_time != tb.entry_time) return ta.entry_time < tb.entry_time;
    return ta.vehicle_id < tb.vehicle_id;
  });
  SimOutput sorted;
  sorted.transactions.reserve(order.size());
  sorted.traces.reserve(order.size());
  for (auto i : order) {
    sorted.transactions.push_back(std::move(out.transactions[i]));
    sorted.traces.push_back(std::move(out.traces[i]));
  }
  return sorted;
}

std::size_t write_transactions(std::ostream& out,
                               std::span<const Transaction> txns,
                               double corrupt_fraction, std::uint64_t seed) {
  std::size_t n_corrupt = corrupt_fraction > 0.0
                              ? static_cast<std::size_t>(corrupt_fraction *
                                                         txns.size())
                              : 0;
  std::vector<std::size_t> order(txns.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<char> corrupt(txns.size(), 0);
  if (n_corrupt > 0) {
    std::mt19937_64 rng(mix_seed(seed, "corrupt"));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n_corrupt; ++i) corrupt[order[i]] = 1;
  }
  out << kTransactionHeader << "\n";
  char buf[64];
  for (std::size_t i = 0; i < txns.size(); ++i) {
    const auto& t = txns[i];
    std::snprintf(buf, sizeof(buf), "%d,%.1f", t.axle_count, t.weight_kg);
    if (!corrupt[i]) {
      out << t.vehicle_id << ',' << to_string(t.vehicle_type) << ','
          << t.entry_station << ',' << format_timestamp(t.entry_time) << ','
          << t.exit_station << ',' << format_timestamp(t.exit_time) << ','
          << buf << "\n";
      continue;
    }
    switch (i % 3) {
      case 0:  // unknown station
        out << t.vehicle_id << ',' << to_string(t.vehicle_type)
            << ",XXBAD," << format_timestamp(t.entry_time) << ','
            << t.exit_station << ',' << format_timestamp(t.exit_time) << ','
            << buf << "\n";
        break;
      case 1:  // non-positive duration
        out << t.vehicle_id << ',' << to_string(t.vehicle_type) << ','
            << t.entry_station << ',' << format_timestamp(t.entry_time) << ','
            << t.exit_station << ',' << format_timestamp(t.entry_time) << ','
            << buf << "\n";
        break;
      default:  // truncated record
        out << t.vehicle_id << ',' << to_string(t.vehicle_type) << ','
            << t.entry_station << "\n";
        break;
    }
  }
  return n_corrupt;
}

void write_traces(std::ostream& out, std::span<const GroundTruthTrace> traces) {
  out << "vehicle_id,t,route_offset_m\n";
  char buf[64];
  for (const auto& tr : traces) {
    out << "# trip," << tr.vehicle_id << ',' << format_timestamp(tr.entry_time)
        << ',' << format_timestamp(tr.exit_time) << ',';
    for (std::size_t i = 0; i < tr.route.edges.size(); ++i) {
      if (i) out << '|';
      out << tr.route.edges[i];
    }
    out << ',';
    for (std::size_t i = 0; i < tr.edge_speeds_kmh.size(); ++i) {
      if (i) out << '|';
      std::snprintf(buf, sizeof(buf), "%.4f", tr.edge_speeds_kmh[i]);
      out << buf;
    }
    out << "\n";
    for (std::size_t s = 0; s < tr.positions_m.size(); ++s) {
      std::snprintf(buf, sizeof(buf), "%.2f", tr.positions_m[s]);
      out << tr.vehicle_id << ',' << tr.entry_time + static_cast<Timestamp>(s)
          << ',' << buf << "\n";
    }
  }
}

std::vector<GroundTruthTrace> load_traces(std::istream& in) {
  std::vector<GroundTruthTrace> traces;
  std::string line;
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, sep)) out.push_back(f);
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# trip,", 0) == 0) {
      auto f = split(line.substr(7), ',');
      if (f.size() != 5) throw std::invalid_argument("bad trace trip header");
      GroundTruthTrace tr;
      tr.vehicle_id = f[0];
      tr.entry_time = parse_timestamp(f[1]);
      tr.exit_time = parse_timestamp(f[2]);
      tr.route.edges = split(f[3], '|');
      for (const auto& v : split(f[4], '|'))
        tr.edge_speeds_kmh.push_back(std::stod(v));
      traces.push_back(std::move(tr));
      continue;
    }
    if (line[0] == '#' || line.rfind("vehicle_id", 0) == 0) continue;
    auto f = split(line, ',');
    if (f.size() != 3) throw std::invalid_argument("bad trace record");
    if (traces.empty()) throw std::invalid_argument("trace data before header");
    traces.back().positions_m.push_back(std::stod(f[2]));
  }
  return traces;
}

}  // namespace tollcast
