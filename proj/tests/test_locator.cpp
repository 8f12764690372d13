#include "tollcast/locator.hpp"

#include <cmath>

#include "doctest.h"
#include "test_util.hpp"

using namespace tollcast;

namespace {

LocatorCallbacks oracle_callbacks(const Route& route, double speed_kmh,
                                  const std::string& destination) {
  LocatorCallbacks cbs;
  cbs.destination = [destination](const std::string&, Timestamp) {
    return destination;
  };
  cbs.route = [route](const std::string&, const std::string&, Timestamp) {
    return route;
  };
  cbs.speed = [speed_kmh](const std::string&, Timestamp) { return speed_kmh; };
  return cbs;
}

GroundTruthTrace constant_speed_trace(const HighwayGraph& g,
                                      const Route& route, Timestamp t0,
                					  double speed_kmh) {
  GroundTruthTrace tr;
  tr.vehicle_id = "V";
  tr.route = route;
  tr.entry_time = t0;
  double len = route_length(g, route);
  double duration = len / (speed_kmh / 3.6);
  tr.exit_time = t0 + static_cast<Timestamp>(std::llround(duration));
  for (Timestamp t = t0; t <= tr.exit_time; ++t) {
    double pos = std::min(len, (speed_kmh / 3.6) * (t - t0));
    tr.positions_m.push_back(pos);
  }
  for (std::size_t i = 0; i < route.edges.size(); ++i)
    tr.edge_speeds_kmh.push_back(speed_kmh);
  return tr;
}

}  // namespace

TEST_CASE("metric formulas") {
  CHECK(speed_accuracy(90, 100) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(speed_accuracy(100, 100) == doctest::Approx(1.0));
  CHECK(speed_accuracy(250, 100) == doctest::Approx(-0.5));
  CHECK_THROWS_AS(speed_accuracy(90, 0), std::domain_error);

  std::vector<std::string> truth{"A", "B", "C", "D", "E",
                                 "F", "G", "H", "I", "J"};
  std::vector<std::string> pred = truth;
  CHECK(destination_accuracy(pred, truth) == doctest::Approx(1.0));
  pred[0] = "X";
  pred[5] = "X";
  pred[9] = "X";
  CHECK(destination_accuracy(pred, truth) == doctest::Approx(0.7));
  std::vector<std::string> none(10, "X");
  CHECK(destination_accuracy(none, truth) == doctest::Approx(0.0));
  std::vector<std::string> shorter(9, "X");
  CHECK_THROWS_AS(destination_accuracy(shorter, truth),
                  std::invalid_argument);

  std::vector<Route> rt{{{"E1"}}, {{"E1", "E2"}}};
  std::vector<Route> rp{{{"E1"}}, {{"E2"}}};
  CHECK(route_accuracy(rp, rt) == doctest::Approx(0.5));
}

TEST_CASE("oracle prediction tracks a constant-speed vehicle exactly") {
  auto g = testutil::chain_graph({6000, 6000});
  Route route{{"E1", "E2"}};
  Timestamp t0 = make_timestamp(2016, 6, 1, 9, 0, 0);
  double v = 96.0;
  auto traj = predict_locations(oracle_callbacks(route, v, "S3"), g, "S1", t0,
                                15.0);
  CHECK(traj.destination == "S3");
  REQUIRE(!traj.estimates.empty());
  CHECK(traj.estimates.front().t == t0);
  CHECK(traj.estimates.front().distance_m == doctest::Approx(0.0));
  CHECK(traj.estimates.back().arrived);
  CHECK(traj.estimates.back().distance_m == doctest::Approx(12000.0));
  for (std::size_t i = 1; i < traj.estimates.size(); ++i) {
    const auto& est = traj.estimates[i];
    CHECK(est.distance_m >= traj.estimates[i - 1].distance_m);
    double expected = std::min(12000.0, (v / 3.6) * 15.0 * i);
    CHECK(est.distance_m == doctest::Approx(expected).epsilon(1e-9));
    auto loc = locate_on_route(g, route, est.distance_m);
    CHECK(loc.edge_id == est.edge_id);
    CHECK(loc.offset_m == doctest::Approx(est.offset_m));
  }

  auto truth = constant_speed_trace(g, route, t0, v);
  CHECK(location_accuracy(traj, truth, 100.0, 15.0) == doctest::Approx(1.0));
}

TEST_CASE("speed floor keeps the loop finite") {
  auto g = testutil::chain_graph({5000});
  Route route{{"E1"}};
  Timestamp t0 = make_timestamp(2016, 6, 1, 9, 0, 0);
  auto traj = predict_locations(oracle_callbacks(route, 0.0, "S2"), g, "S1",
                                t0, 15.0);
  CHECK(traj.estimates.back().arrived);
  // floored at 5 km/h: 5 km needs an hour, about 240 steps of 15 s
  CHECK(traj.estimates.size() >= 241);
  CHECK(traj.estimates.size() <= 242);
}

TEST_CASE("location accuracy thresholds offsets") {
  auto g = testutil::chain_graph({9000});
  Route route{{"E1"}};
  Timestamp t0 = make_timestamp(2016, 6, 1, 7, 0, 0);
  auto truth = constant_speed_trace(g, route, t0, 90.0);

  PredictedTrajectory offset150;
  offset150.t0 = t0;
  offset150.route = route;
  offset150.interval_s = 15.0;
  PredictedTrajectory offset50 = offset150;
  for (Timestamp t = t0; t <= truth.exit_time + 30; t += 15) {
    double pos = truth.position_at(t);
    offset150.estimates.push_back({t, "E1", 0.0, false, pos + 150.0});
    offset50.estimates.push_back({t, "E1", 0.0, false, pos + 50.0});
  }
  CHECK(location_accuracy(offset150, truth, 100.0, 15.0) ==
        doctest::Approx(0.0));
  CHECK(location_accuracy(offset50, truth, 100.0, 15.0) ==
        doctest::Approx(1.0));

  // wrong predicted route scores zero at every instant
  PredictedTrajectory wrong = offset50;
  wrong.route = Route{{"E9"}};
  CHECK(location_accuracy(wrong, truth, 100.0, 15.0) == doctest::Approx(0.0));

  PredictedTrajectory late = offset50;
  late.t0 = truth.exit_time + 100;
  CHECK_THROWS_AS(location_accuracy(late, truth, 100.0, 15.0),
                  std::invalid_argument);
}

TEST_CASE("metrics are permutation invariant") {
  std::vector<std::string> truth{"A", "B", "C", "D"};
  std::vector<std::string> pred{"A", "X", "C", "X"};
  double base = destination_accuracy(pred, truth);
  std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<std::string> truth2, pred2;
  for (auto i : perm) {
    truth2.push_back(truth[i]);
    pred2.push_back(pred[i]);
  }
  CHECK(destination_accuracy(pred2, truth2) == doctest::Approx(base));
}

TEST_CASE("trajectory export format") {
  auto g = testutil::chain_graph({3000});
  Route route{{"E1"}};
  Timestamp t0 = make_timestamp(2016, 6, 1, 9, 0, 0);
  auto traj = predict_locations(oracle_callbacks(route, 90, "S2"), g, "S1",
                                t0, 15.0);
  traj.vehicle_id = "V7";
  std::ostringstream out;
  write_trajectories(out, std::vector<PredictedTrajectory>{traj});
  std::string text = out.str();
  CHECK(text.rfind("vehicle_id,timestamp,edge,offset_m,arrived", 0) == 0);
  CHECK(text.find("V7,2016-06-01 09:00:00,E1,0.00,0") != std::string::npos);
  CHECK(text.find(",1\n") != std::string::npos);  // an arrived row exists
}
