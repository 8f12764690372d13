#include "tollcast/locator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tollcast/errors.hpp"

namespace tollcast {

double PredictedTrajectory::distance_at(Timestamp t) const {
  if (estimates.empty() || t < t0) return 0.0;
  std::size_t idx = static_cast<std::size_t>(
      (static_cast<double>(t - t0)) / interval_s + 0.5);
  if (idx >= estimates.size()) return estimates.back().distance_m;
  return estimates[idx].distance_m;
}

PredictedTrajectory predict_locations(const LocatorCallbacks& predictors,
                                      const HighwayGraph& graph,
                                      const std::string& entrance,
                                      Timestamp t0, double interval_s,
                                      double speed_floor_kmh) {
  if (interval_s <= 0) throw std::invalid_argument("interval must be positive");
  if (!graph.has_station(entrance))
    throw IdentifierError("unknown entrance " + entrance);

  PredictedTrajectory traj;
  traj.t0 = t0;
  traj.interval_s = interval_s;
  traj.destination = predictors.destination(entrance, t0);
  traj.route = predictors.route(entrance, traj.destination, t0);
  validate_route(graph, traj.route);

  double total = route_length(graph, traj.route);
  double distance = 0.0;
  Timestamp t = t0;
  traj.estimates.push_back({t0, traj.route.edges.front(), 0.0, false, 0.0});
  while (distance < total) {
    auto here = locate_on_route(graph, traj.route, std::min(distance, total));
    double v = std::max(predictors.speed(here.edge_id, t), speed_floor_kmh);
    distance += (v / 3.6) * interval_s;
    t += static_cast<Timestamp>(interval_s);
    auto next = locate_on_route(graph, traj.route, std::min(distance, total));
    traj.estimates.push_back({t, next.edge_id, next.offset_m,
                              distance >= total,
                              std::min(distance, total)});
  }
  return traj;
}

PredictedTrajectory predict_locations(const PredictorBundle& bundle,
                                      const std::string& vehicle_id,
                                      const std::string& entrance,
                                      Timestamp t0, double interval_s) {
  LocatorCallbacks cbs;
  cbs.destination = [&](const std::string& origin, Timestamp t) {
    return bundle.predict_destination(vehicle_id, origin, t);
  };
  cbs.route = [&](const std::string& origin, const std::string& dest,
                  Timestamp t) {
    return bundle.predict_route(vehicle_id, origin, dest, t);
  };
  cbs.speed = [&](const std::string& edge_id, Timestamp t) {
    return bundle.predict_speed(vehicle_id, edge_id, t);
  };
  auto traj = predict_locations(cbs, bundle.graph(), entrance, t0, interval_s);
  traj.vehicle_id = vehicle_id;
  return traj;
}

namespace {

double match_fraction(std::size_t n, std::size_t correct) {
  return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

double destination_accuracy(std::span<const std::string> predictions,
                            std::span<const std::string> truths) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("prediction/truth length mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == truths[i]) ++correct;
  return match_fraction(predictions.size(), correct);
}

double route_accuracy(std::span<const Route> predictions,
                      std::span<const Route> truths) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("prediction/truth length mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == truths[i]) ++correct;
  return match_fraction(predictions.size(), correct);
}

double speed_accuracy(double predicted_kmh, double actual_kmh) {
  if (actual_kmh <= 0)
    throw std::domain_error("speed accuracy needs positive actual speed");
  return 1.0 - std::abs(predicted_kmh - actual_kmh) / actual_kmh;
}

double location_accuracy(const PredictedTrajectory& predicted,
                         const GroundTruthTrace& truth, double threshold_m,
                         double interval_s) {
  Timestamp start = std::max(predicted.t0, truth.entry_time);
  Timestamp end = truth.exit_time;
  if (start > end) throw std::invalid_argument("no overlap with ground truth");
  bool same_route = predicted.route == truth.route;
  std::size_t samples = 0, correct = 0;
  for (Timestamp t = start; t <= end;
       t += static_cast<Timestamp>(interval_s)) {
    ++samples;
    if (!same_route) continue;
    double pred = predicted.distance_at(t);
    double actual = truth.position_at(t);
    if (std::abs(pred - actual) <= threshold_m) ++correct;
  }
  if (samples == 0) throw std::invalid_argument("no overlap with ground truth");
  return match_fraction(samples, correct);
}

EvaluationReport evaluate_bundle(const PredictorBundle& bundle,
                                 std::span<const GroundTruthTrace> truth,
                                 double threshold_m, double interval_s) {
  EvaluationReport report;
  report.threshold_m = threshold_m;
  report.interval_s = interval_s;
  int slots = kMinutesPerDay / bundle.config().slot_width_min;
  report.per_slot_destination_acc.assign(slots, 0.0);
  report.per_slot_location_acc.assign(slots, 0.0);
  report.per_slot_trips.assign(slots, 0);
  std::vector<std::size_t> slot_dest_correct(slots, 0);
  std::vector<double> slot_location_sum(slots, 0.0);

  std::size_t dest_correct = 0, route_correct = 0;
  std::size_t emp_dest_correct = 0, emp_route_correct = 0;
  double speed_sum = 0.0, emp_speed_sum = 0.0;
  std::size_t speed_n = 0;
  double loc_all_sum = 0.0, loc_routed_sum = 0.0;
  std::size_t routed_n = 0;

  const auto& graph = bundle.graph();
  for (const auto& tr : truth) {
    const auto& txn = tr.txn;
    int slot = slot_of(txn.entry_time, bundle.config().slot_width_min).index;
    ++report.per_slot_trips[slot];

    std::string d_pred = bundle.predict_destination(txn.vehicle_id,
                                                    txn.entry_station,
                                                    txn.entry_time);
    std::string d_emp = bundle.emp_destination(txn.vehicle_id,
                                               txn.entry_station,
                                               txn.entry_time);
    bool d_ok = d_pred == txn.exit_station;
    if (d_ok) {
      ++dest_correct;
      ++slot_dest_correct[slot];
    }
    if (d_emp == txn.exit_station) ++emp_dest_correct;

    // Route heads are scored on the true destination.
    Route r_pred = bundle.predict_route(txn.vehicle_id, txn.entry_station,
                                        txn.exit_station, txn.entry_time);
    Route r_emp = bundle.emp_route(txn.vehicle_id, txn.entry_station,
                                   txn.exit_station, txn.entry_time);
    if (r_pred == tr.route) ++route_correct;
    if (r_emp == tr.route) ++emp_route_correct;

    // Speed heads are scored per edge at the true edge-entry times.
    auto durations = tr.edge_durations_s(graph);
    double cum = 0.0;
    for (std::size_t i = 0; i < tr.route.edges.size(); ++i) {
      Timestamp edge_entry =
          txn.entry_time + static_cast<Timestamp>(std::llround(cum));
      double actual = tr.edge_speeds_kmh[i];
      double pred = bundle.predict_speed(txn.vehicle_id, tr.route.edges[i],
                                         edge_entry);
      double emp = bundle.emp_speed(txn.vehicle_id, tr.route.edges[i],
                                    edge_entry);
      speed_sum += std::max(0.0, speed_accuracy(pred, actual));
      emp_speed_sum += std::max(0.0, speed_accuracy(emp, actual));
      ++speed_n;
      cum += durations[i];
    }

    // End-to-end location accuracy via the full prediction loop.
    auto traj = predict_locations(bundle, txn.vehicle_id, txn.entry_station,
                                  txn.entry_time, interval_s);
    double acc = location_accuracy(traj, tr, threshold_m, interval_s);
    loc_all_sum += acc;
    slot_location_sum[slot] += acc;
    if (traj.route == tr.route) {
      loc_routed_sum += acc;
      ++routed_n;
    }
  }

  report.trips = truth.size();
  report.destination_acc = match_fraction(truth.size(), dest_correct);
  report.route_acc = match_fraction(truth.size(), route_correct);
  report.emp_destination_acc = match_fraction(truth.size(), emp_dest_correct);
  report.emp_route_acc = match_fraction(truth.size(), emp_route_correct);
  report.speed_acc = speed_n ? speed_sum / speed_n : 0.0;
  report.emp_speed_acc = speed_n ? emp_speed_sum / speed_n : 0.0;
  report.location_acc_all =
      truth.empty() ? 0.0 : loc_all_sum / static_cast<double>(truth.size());
  report.location_acc_routed =
      routed_n ? loc_routed_sum / static_cast<double>(routed_n) : 0.0;
  for (int s = 0; s < slots; ++s) {
    if (report.per_slot_trips[s] == 0) continue;
    report.per_slot_destination_acc[s] =
        static_cast<double>(slot_dest_correct[s]) / report.per_slot_trips[s];
    report.per_slot_location_acc[s] =
        slot_location_sum[s] / report.per_slot_trips[s];
  }
  return report;
}

void write_trajectories(std::ostream& out,
                        std::span<const PredictedTrajectory> trajectories) {
  out << "vehicle_id,timestamp,edge,offset_m,arrived\n";
  char buf[64];
  for (const auto& traj : trajectories) {
    for (const auto& est : traj.estimates) {
      std::snprintf(buf, sizeof(buf), "%.2f", est.offset_m);
      out << traj.vehicle_id << ',' << format_timestamp(est.t) << ','
          << est.edge_id << ',' << buf << ',' << (est.arrived ? 1 : 0)
          << "\n";
    }
  }
}

void write_report(std::ostream& out, const EvaluationReport& report) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "trips,%zu\n", report.trips);
  out << buf;
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f\n", name, v);
    out << buf;
  };
  row("destination_accuracy", report.destination_acc);
  row("route_accuracy", report.route_acc);
  row("speed_accuracy", report.speed_acc);
  row("location_accuracy_all", report.location_acc_all);
  row("location_accuracy_routed", report.location_acc_routed);
  row("emp_destination_accuracy", report.emp_destination_acc);
  row("emp_route_accuracy", report.emp_route_acc);
  row("emp_speed_accuracy", report.emp_speed_acc);
  row("threshold_m", report.threshold_m);
  row("interval_s", report.interval_s);
  out << "slot,trips,destination_accuracy,location_accuracy\n";
  for (std::size_t s = 0; s < report.per_slot_trips.size(); ++s) {
    if (report.per_slot_trips[s] == 0) continue;
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f,%.6f\n", s,
                  report.per_slot_trips[s], report.per_slot_destination_acc[s],
                  report.per_slot_location_acc[s]);
    out << buf;
  }
}

}  // namespace tollcast
