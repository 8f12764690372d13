#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tollcast/crowd_speed.hpp"
#include "tollcast/graph.hpp"
#include "tollcast/ingest.hpp"

namespace tollcast {

struct SimConfig {
  int stations = 50;
  double edge_density = 1.4;  // undirected links per station
  int days = 1;
  int vehicles = 2000;
  std::int64_t start_day = 16953;  // 2016-06-01

  // population mix by destination-entropy regime
  double frac_single = 0.2;    // one rare OD, entropy 0
  double frac_commuter = 0.5;  // two-way commute, entropy 1
  double frac_multi = 0.3;     // several destinations, entropy > 1

  double personal_offset_sd_kmh = 6.0;  // clamped to +-30
  double speed_noise_sd_kmh = 2.0;
  double route_stickiness = 0.85;
  // Non-sticky choices weight alternatives by exp(-sensitivity * detour
  // ratio), so long detours stay rare.
  double detour_sensitivity = 12.0;
  int max_route_edges = 3;

  double edge_min_m = 3000.0;
  double edge_max_m = 15000.0;
  double base_free_min_frac = 0.80;  // free-flow mean as a limit fraction
  double base_free_max_frac = 0.90;
  double ramp_min_m = 200.0;
  double ramp_max_m = 600.0;

  double rain_probability = 0.12;
  double heavy_rain_probability = 0.04;
  int holiday_every_n_days = 14;

  double congestion_depth = 0.25;  // peak slowdown fraction at 10h and 18h
  double rest_dwell_probability = 0.0;  // mid-trip dwell injection

  // Zeroes personal offsets, speed noise and ramps so traversal times are
  // exact functions of the latent per-edge-slot means.
  bool noise_free = false;
};

struct BehaviorProfile {
  std::string vehicle_id;
  VehicleType type = VehicleType::Car;
  int entropy_regime = 0;  // 0 single, 1 commuter, 2 multi
  std::vector<std::pair<std::string, std::string>> od_prefs;
  std::vector<double> od_weights;  // normalized
  double base_offset_kmh = 0.0;
  double stickiness = 0.85;
  std::array<double, 7> weekday_activity{};  // by ISO day of week - 1
};

struct GroundTruthTrace {
  std::string vehicle_id;
  Route route;
  Timestamp entry_time = 0;
  Timestamp exit_time = 0;
  std::vector<double> positions_m;     // along-route, one per second
  std::vector<double> edge_speeds_kmh; // constant per edge for one trip
  Transaction txn;

  double position_at(Timestamp t) const;
  /// True traversal seconds of each route edge.
  std::vector<double> edge_durations_s(const HighwayGraph& graph) const;
};

struct World {
  SimConfig config;
  HighwayGraph graph;
  std::vector<BehaviorProfile> population;
  ContextCalendar calendar;
  std::vector<double> edge_base_free_kmh;  // by edge index

  /// Latent crowd mean for an edge in a 30-minute slot under day context.
  double latent_mean_kmh(std::size_t edge_index, int slot30,
                         const ContextRecord& ctx) const;
};

constexpr int kLatentSlotWidthMin = 30;

World generate_world(const SimConfig& config, std::uint64_t seed);

struct SimOutput {
  std::vector<Transaction> transactions;  // sorted by entry time
  std::vector<GroundTruthTrace> traces;   // aligned with transactions
};

SimOutput simulate_days(const World& world, int days, std::uint64_t seed);

/// Writes transactions, optionally mangling floor(fraction * n) records in
/// ways the parser must reject. Returns the number of corrupted records.
std::size_t write_transactions(std::ostream& out,
                               std::span<const Transaction> txns,
                               double corrupt_fraction = 0.0,
                               std::uint64_t seed = 0);

void write_traces(std::ostream& out, std::span<const GroundTruthTrace> traces);
std::vector<GroundTruthTrace> load_traces(std::istream& in);

}  // namespace tollcast
