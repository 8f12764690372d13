#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "tollcast/crowd_speed.hpp"

namespace tollcast {

/// Pipeline configuration. Lives in a key=value text file; command-line
/// flags override file values. The canonical serialization is hashed into
/// every output artifact.
struct RunConfig {
  // artifact paths
  std::string graph_path;
  std::string transactions_path;
  std::string context_path;
  std::string traces_path;
  std::string bundle_dir;
  std::string out_dir = "out";

  // discretization
  int slot_width_min = 30;           // feature / crowd-table slots
  int recovery_slot_width_min = 10;  // state-sequence slots
  double segment_length_m = 1000.0;
  double speed_unit_kmh = 1.0;
  double search_speed_unit_kmh = 5.0;

  // crowd speed estimation
  double lambda = kDefaultConfidenceLambda;
  int gmm_components = 2;
  int min_samples = 5;

  // recovery search
  double alpha = 0.05;
  std::uint64_t node_budget = 1'000'000;
  int max_candidates_per_trip = 64;
  int max_route_edges = 8;
  double duration_slack_factor = 3.0;

  // learning
  int trees = 25;
  std::uint64_t seed = 1;
  int hist_top_k = 5;

  // location prediction / evaluation
  double threshold_m = 100.0;
  double interval_s = 15.0;
  std::string eval_mode = "all";  // "all" or "routed"; reports carry both

  // synthetic world
  int sim_stations = 50;
  double sim_edge_density = 1.4;
  int sim_days = 1;
  int sim_vehicles = 2000;
  int sim_max_route_edges = 4;
  double sim_stickiness = 0.85;
  double sim_ramp_min_m = 200.0;
  double sim_ramp_max_m = 600.0;
  double sim_corrupt_fraction = 0.0;
  bool sim_noise_free = false;
  bool sim_write_traces = true;

  void set(const std::string& key, const std::string& value);
  void validate() const;
  std::string canonical() const;
  std::uint64_t hash() const;

  static RunConfig from_file(const std::string& path);
};

std::uint64_t fnv1a_hash(const std::string& text);

/// Standard first line of every artifact file.
std::string artifact_header(const RunConfig& config);

}  // namespace tollcast
