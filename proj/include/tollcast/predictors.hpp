#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tollcast/crowd_speed.hpp"
#include "tollcast/graph.hpp"
#include "tollcast/ingest.hpp"
#include "tollcast/mondrian.hpp"
#include "tollcast/recovery.hpp"

namespace tollcast {

struct PredictorConfig {
  int slot_width_min = 30;  // 48-slot scheme for features and crowd tables
  int hist_top_k = 5;
  int crowd_top_k = 5;
  int trees = 25;
  std::uint64_t seed = 1;
  int max_route_edges = kDefaultMaxRouteEdges;
  int max_route_labels = 8;  // candidate-route index space of the r-predictor
  std::uint64_t config_hash = 0;
};

/// Everything the bundle remembers about one vehicle.
struct VehicleProfile {
  VehicleType type = VehicleType::Car;
  std::map<std::string, std::int64_t> dest_counts;
  std::map<std::pair<std::string, std::string>, std::map<int, std::int64_t>>
      route_counts;  // (origin, dest) -> candidate index -> count
  double speed_sum = 0.0;
  std::int64_t speed_n = 0;
  std::int64_t trip_count = 0;
  double saved_time_sum = 0.0;
  std::int64_t saved_time_n = 0;

  double mean_speed_kmh() const {
    return speed_n > 0 ? speed_sum / speed_n : 0.0;
  }
};

/// Population-level tables frozen from the training window.
struct CrowdTables {
  // (origin, slot) -> destination -> probability
  std::map<std::pair<std::string, int>, std::map<std::string, double>>
      dest_dist;
  // (origin, dest, slot) -> candidate route index -> probability
  std::map<std::tuple<std::string, std::string, int>, std::map<int, double>>
      route_dist;
  // (origin, dest, slot) -> (mean duration s, count)
  std::map<std::tuple<std::string, std::string, int>,
           std::pair<double, std::int64_t>>
      od_duration;
  CrowdSpeedMap speed_map;
};

struct DestinationFeatures {
  std::string origin;
  std::vector<std::pair<std::string, double>> historical_top;  // padded
  std::vector<std::pair<std::string, double>> crowd_top;       // padded
  int entry_slot = 0;
  double trip_count = 0.0;
  VehicleType vehicle_type = VehicleType::Car;
  int day_of_week = 1;
  bool is_weekend = false;
  bool is_holiday = false;
};

struct RouteFeatures {
  std::string origin;
  std::string destination;
  std::vector<double> hist_route_freq;   // per candidate index, padded
  std::vector<double> crowd_route_prob;  // per candidate index, padded
  std::vector<double> recent_speed_kmh;  // per candidate, previous-slot median
  double highway_trip_frequency = 0.0;
  double saved_time_s = 0.0;
  bool saved_time_missing = true;
  int entry_slot = 0;
  int day_of_week = 1;
};

struct SpeedFeatures {
  double hist_mean_speed_kmh = 0.0;
  bool has_history = false;
  int slot = 0;
  LetterValues crowd;
  bool crowd_fallback = false;
  VehicleType vehicle_type = VehicleType::Car;
  bool is_weekend = false;
  Weather weather = Weather::Clear;
};

DestinationFeatures extract_destination_features(
    const VehicleProfile* profile, const Transaction& entry,
    const CrowdTables& tables, const ContextRecord& ctx,
    const PredictorConfig& cfg);

RouteFeatures extract_route_features(const VehicleProfile* profile,
                                     const std::string& origin,
                                     const std::string& destination,
                                     std::size_t candidate_count,
                                     Timestamp when, const CrowdTables& tables,
                                     const ContextRecord& ctx,
                                     const HighwayGraph& graph,
                                     std::span<const Route> candidates,
                                     const PredictorConfig& cfg);

SpeedFeatures extract_speed_features(const VehicleProfile* profile,
                                     VehicleType type,
                                     const std::string& edge_id, Timestamp when,
                                     const CrowdTables& tables,
                                     const ContextRecord& ctx,
                                     const HighwayGraph& graph,
                                     const PredictorConfig& cfg);

struct EmpPrediction {
  std::string destination;
  Route route;
  double speed_kmh = 0.0;
};

/// The three predictors plus the frozen tables, vehicle profiles and the
/// context calendar they were trained with.
class PredictorBundle {
 public:
  static PredictorBundle train(
      std::span<const Trip> trips,
      const std::map<std::string, StateSequence>& recovered,
      const CrowdSpeedMap& speed_map, const HighwayGraph& graph,
      const ContextCalendar& calendar, const PredictorConfig& cfg);

  std::string predict_destination(const std::string& vehicle_id,
                                  const std::string& origin,
                                  Timestamp t) const;
  Route predict_route(const std::string& vehicle_id, const std::string& origin,
                      const std::string& destination, Timestamp t) const;
  double predict_speed(const std::string& vehicle_id,
                       const std::string& edge_id, Timestamp t) const;

  std::string emp_destination(const std::string& vehicle_id,
                              const std::string& origin, Timestamp t) const;
  Route emp_route(const std::string& vehicle_id, const std::string& origin,
                  const std::string& destination, Timestamp t) const;
  double emp_speed(const std::string& vehicle_id, const std::string& edge_id,
                   Timestamp t) const;
  /// Naive empirical prediction for a highway entry (destination, its
  /// route, entry-edge speed).
  EmpPrediction emp_baseline(const std::string& vehicle_id,
                             const std::string& origin, Timestamp t) const;

  /// Online update from a completed transaction. The destination head gets
  /// the observed exit; route and speed labels come from recovering the
  /// single trip against the crowd speed map. Duplicate feedback throws.
  void feedback_update(const Transaction& completed);

  const HighwayGraph& graph() const { return graph_; }
  const CrowdTables& tables() const { return tables_; }
  const ContextCalendar& calendar() const { return calendar_; }
  const PredictorConfig& config() const { return cfg_; }
  const VehicleProfile* profile(const std::string& vehicle_id) const;
  std::size_t d_update_count() const { return d_forest_->update_count(); }
  std::size_t r_update_count() const { return r_forest_->update_count(); }
  std::size_t s_update_count() const { return s_forest_->update_count(); }
  const MondrianForest& d_forest() const { return *d_forest_; }
  const MondrianForest& r_forest() const { return *r_forest_; }
  const MondrianForest& s_forest() const { return *s_forest_; }

  void save(const std::string& dir) const;
  static PredictorBundle load(const std::string& dir);

 private:
  PredictorBundle() = default;

  HighwayGraph graph_;
  ContextCalendar calendar_;
  CrowdTables tables_;
  PredictorConfig cfg_;
  std::map<std::string, VehicleProfile> profiles_;
  std::set<std::string> feedback_seen_;
  std::int64_t window_start_day_ = 0;
  std::int64_t window_end_day_ = 0;
  std::optional<MondrianForest> d_forest_;
  std::optional<MondrianForest> r_forest_;
  std::optional<MondrianForest> s_forest_;

  int station_code(const std::string& id) const;  // 0 = none
  FeatureVector encode_destination(const DestinationFeatures& f) const;
  FeatureVector encode_route(const RouteFeatures& f) const;
  FeatureVector encode_speed(const SpeedFeatures& f) const;
  FeatureSchema destination_schema() const;
  FeatureSchema route_schema() const;
  FeatureSchema speed_schema() const;
  StateSequence recover_single_trip(const Trip& trip) const;
  void apply_trip_to_profile(VehicleProfile& p, const Trip& trip,
                             const StateSequence* seq);
};

}  // namespace tollcast
