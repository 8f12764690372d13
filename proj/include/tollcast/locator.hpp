#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tollcast/graph.hpp"
#include "tollcast/predictors.hpp"
#include "tollcast/sim.hpp"

namespace tollcast {

constexpr double kSpeedFloorKmh = 5.0;  // guarantees loop termination
constexpr double kDefaultThresholdM = 100.0;
constexpr double kDefaultIntervalS = 15.0;

struct LocationEstimate {
  Timestamp t = 0;
  std::string edge_id;
  double offset_m = 0.0;
  bool arrived = false;
  double distance_m = 0.0;  // cumulative along the predicted route
};

struct PredictedTrajectory {
  std::string vehicle_id;
  Timestamp t0 = 0;
  std::string destination;
  Route route;
  double interval_s = kDefaultIntervalS;
  std::vector<LocationEstimate> estimates;  // t0, t0+interval, ...

  double distance_at(Timestamp t) const;
};

/// Predictor slots for the location loop; lets tests drive the loop with
/// oracle predictors.
struct LocatorCallbacks {
  std::function<std::string(const std::string& entrance, Timestamp t)>
      destination;
  std::function<Route(const std::string& origin, const std::string& dest,
                      Timestamp t)>
      route;
  std::function<double(const std::string& edge_id, Timestamp t)> speed;
};

/// Dead-reckons a vehicle from its entrance: predict destination, then
/// route, then integrate predicted speeds every interval until the route is
/// consumed. Speeds are floored so the loop always terminates.
PredictedTrajectory predict_locations(const LocatorCallbacks& predictors,
                                      const HighwayGraph& graph,
                                      const std::string& entrance,
                                      Timestamp t0,
                                      double interval_s = kDefaultIntervalS,
                                      double speed_floor_kmh = kSpeedFloorKmh);

PredictedTrajectory predict_locations(const PredictorBundle& bundle,
                                      const std::string& vehicle_id,
                                      const std::string& entrance,
                                      Timestamp t0,
                                      double interval_s = kDefaultIntervalS);

double destination_accuracy(std::span<const std::string> predictions,
                            std::span<const std::string> truths);
double route_accuracy(std::span<const Route> predictions,
                      std::span<const Route> truths);

/// 1 - |predicted - actual| / actual; negative when the error exceeds 100%.
double speed_accuracy(double predicted_kmh, double actual_kmh);

/// Fraction of sampled instants (while the vehicle is truly on the highway)
/// with along-route error within the threshold; instants on a wrongly
/// predicted route count as incorrect.
double location_accuracy(const PredictedTrajectory& predicted,
                         const GroundTruthTrace& truth,
                         double threshold_m = kDefaultThresholdM,
                         double interval_s = kDefaultIntervalS);

struct EvaluationReport {
  std::size_t trips = 0;
  double destination_acc = 0.0;
  double route_acc = 0.0;
  double speed_acc = 0.0;  // per-sample values clamped at 0 for display
  double location_acc_all = 0.0;     // every vehicle
  double location_acc_routed = 0.0;  // correctly-routed vehicles only
  double emp_destination_acc = 0.0;
  double emp_route_acc = 0.0;
  double emp_speed_acc = 0.0;
  double threshold_m = kDefaultThresholdM;
  double interval_s = kDefaultIntervalS;
  std::vector<double> per_slot_destination_acc;  // by origin slot
  std::vector<double> per_slot_location_acc;
  std::vector<std::size_t> per_slot_trips;
};

/// Runs the full prediction loop over a test window with ground truth.
EvaluationReport evaluate_bundle(const PredictorBundle& bundle,
                                 std::span<const GroundTruthTrace> truth,
                                 double threshold_m = kDefaultThresholdM,
                                 double interval_s = kDefaultIntervalS);

void write_trajectories(std::ostream& out,
                        std::span<const PredictedTrajectory> trajectories);
void write_report(std::ostream& out, const EvaluationReport& report);

}  // namespace tollcast
