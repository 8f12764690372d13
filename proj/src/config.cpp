#include "tollcast/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tollcast {

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("bad boolean value '" + v + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "graph") graph_path = value;
  else if (key == "transactions") transactions_path = value;
  else if (key == "context") context_path = value;
  else if (key == "traces") traces_path = value;
  else if (key == "bundle") bundle_dir = value;
  else if (key == "out") out_dir = value;
  else if (key == "slot_width_min") slot_width_min = std::stoi(value);
  else if (key == "recovery_slot_width_min") recovery_slot_width_min = std::stoi(value);
  else if (key == "segment_length_m") segment_length_m = std::stod(value);
  else if (key == "speed_unit_kmh") speed_unit_kmh = std::stod(value);
  else if (key == "search_speed_unit_kmh") search_speed_unit_kmh = std::stod(value);
  else if (key == "lambda") lambda = std::stod(value);
  else if (key == "gmm_components") gmm_components = std::stoi(value);
  else if (key == "min_samples") min_samples = std::stoi(value);
  else if (key == "alpha") alpha = std::stod(value);
  else if (key == "node_budget") node_budget = std::stoull(value);
  else if (key == "max_candidates_per_trip") max_candidates_per_trip = std::stoi(value);
  else if (key == "max_route_edges") max_route_edges = std::stoi(value);
  else if (key == "duration_slack_factor") duration_slack_factor = std::stod(value);
  else if (key == "trees") trees = std::stoi(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "hist_top_k") hist_top_k = std::stoi(value);
  else if (key == "threshold_m") threshold_m = std::stod(value);
  else if (key == "interval_s") interval_s = std::stod(value);
  else if (key == "eval_mode") eval_mode = value;
  else if (key == "sim_stations") sim_stations = std::stoi(value);
  else if (key == "sim_edge_density") sim_edge_density = std::stod(value);
  else if (key == "sim_days") sim_days = std::stoi(value);
  else if (key == "sim_vehicles") sim_vehicles = std::stoi(value);
  else if (key == "sim_max_route_edges") sim_max_route_edges = std::stoi(value);
  else if (key == "sim_stickiness") sim_stickiness = std::stod(value);
  else if (key == "sim_ramp_min_m") sim_ramp_min_m = std::stod(value);
  else if (key == "sim_ramp_max_m") sim_ramp_max_m = std::stod(value);
  else if (key == "sim_corrupt_fraction") sim_corrupt_fraction = std::stod(value);
  else if (key == "sim_noise_free") sim_noise_free = parse_bool(value);
  else if (key == "sim_write_traces") sim_write_traces = parse_bool(value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("config out of range: " + what);
  };
  require(slot_width_min > 0 && 1440 % slot_width_min == 0, "slot_width_min");
  require(recovery_slot_width_min > 0 && 1440 % recovery_slot_width_min == 0,
          "recovery_slot_width_min");
  require(segment_length_m > 0, "segment_length_m");
  require(speed_unit_kmh > 0, "speed_unit_kmh");
  require(search_speed_unit_kmh > 0, "search_speed_unit_kmh");
  require(lambda > 0, "lambda");
  require(gmm_components >= 1, "gmm_components");
  require(min_samples >= 1, "min_samples");
  require(alpha > 0 && alpha < 1, "alpha");
  require(max_route_edges >= 1, "max_route_edges");
  require(max_candidates_per_trip >= 1, "max_candidates_per_trip");
  require(duration_slack_factor >= 1, "duration_slack_factor");
  require(trees >= 1, "trees");
  require(hist_top_k >= 1, "hist_top_k");
  require(threshold_m > 0, "threshold_m");
  require(interval_s > 0, "interval_s");
  require(eval_mode == "all" || eval_mode == "routed", "eval_mode");
  require(sim_stations >= 2, "sim_stations");
  require(sim_days >= 1, "sim_days");
  require(sim_vehicles >= 1, "sim_vehicles");
  require(sim_corrupt_fraction >= 0 && sim_corrupt_fraction < 1,
          "sim_corrupt_fraction");
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  out << "alpha=" << num(alpha) << "\n"
      << "duration_slack_factor=" << num(duration_slack_factor) << "\n"
      << "eval_mode=" << eval_mode << "\n"
      << "gmm_components=" << gmm_components << "\n"
      << "hist_top_k=" << hist_top_k << "\n"
      << "interval_s=" << num(interval_s) << "\n"
      << "lambda=" << num(lambda) << "\n"
      << "max_candidates_per_trip=" << max_candidates_per_trip << "\n"
      << "max_route_edges=" << max_route_edges << "\n"
      << "min_samples=" << min_samples << "\n"
      << "node_budget=" << node_budget << "\n"
      << "recovery_slot_width_min=" << recovery_slot_width_min << "\n"
      << "search_speed_unit_kmh=" << num(search_speed_unit_kmh) << "\n"
      << "seed=" << seed << "\n"
      << "segment_length_m=" << num(segment_length_m) << "\n"
      << "sim_corrupt_fraction=" << num(sim_corrupt_fraction) << "\n"
      << "sim_days=" << sim_days << "\n"
      << "sim_edge_density=" << num(sim_edge_density) << "\n"
      << "sim_max_route_edges=" << sim_max_route_edges << "\n"
      << "sim_noise_free=" << (sim_noise_free ? 1 : 0) << "\n"
      << "sim_ramp_max_m=" << num(sim_ramp_max_m) << "\n"
      << "sim_ramp_min_m=" << num(sim_ramp_min_m) << "\n"
      << "sim_stations=" << sim_stations << "\n"
      << "sim_stickiness=" << num(sim_stickiness) << "\n"
      << "sim_vehicles=" << sim_vehicles << "\n"
      << "slot_width_min=" << slot_width_min << "\n"
      << "speed_unit_kmh=" << num(speed_unit_kmh) << "\n"
      << "threshold_m=" << num(threshold_m) << "\n"
      << "trees=" << trees << "\n";
  return out.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a_hash(canonical()); }

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value");
    config.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return config;
}

std::string artifact_header(const RunConfig& config) {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "# config_hash=%016llx seed=%llu\n",
                static_cast<unsigned long long>(config.hash()),
                static_cast<unsigned long long>(config.seed));
  return buf;
}

}  // namespace tollcast
