#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "tollcast/crowd_speed.hpp"
#include "tollcast/graph.hpp"
#include "tollcast/ingest.hpp"
#include "tollcast/ks_test.hpp"
#include "tollcast/locator.hpp"
#include "tollcast/mondrian.hpp"
#include "tollcast/predictors.hpp"
#include "tollcast/recovery.hpp"
#include "tollcast/sim.hpp"
#include "tollcast/stats.hpp"

namespace py = pybind11;
using namespace tollcast;

namespace {

std::vector<Trip> trips_from_destinations(const std::vector<std::string>& dests) {
  std::vector<Trip> trips;
  Timestamp t0 = make_timestamp(2016, 6, 1, 8, 0, 0);
  for (std::size_t i = 0; i < dests.size(); ++i) {
    Transaction txn;
    txn.vehicle_id = "V";
    txn.entry_station = "O";
    txn.exit_station = dests[i];
    txn.entry_time = t0 + static_cast<Timestamp>(i) * 60;
    txn.exit_time = txn.entry_time + 600;
    trips.push_back(make_trip(txn));
  }
  return trips;
}

py::dict simulate_files(const std::string& out_dir, int stations, int vehicles,
                        int days, std::uint64_t seed, bool noise_free,
                        double corrupt_fraction) {
  SimConfig config;
  config.stations = stations;
  config.vehicles = vehicles;
  config.days = days;
  config.noise_free = noise_free;
  auto world = generate_world(config, seed);
  auto out = simulate_days(world, days, seed);
  world.graph.save_file(out_dir + "/graph.csv");
  world.calendar.save_file(out_dir + "/context.csv");
  std::size_t corrupted;
  {
    std::ofstream f(out_dir + "/transactions.csv");
    corrupted = write_transactions(f, out.transactions, corrupt_fraction, seed);
  }
  {
    std::ofstream f(out_dir + "/traces.csv");
    write_traces(f, out.traces);
  }
  py::dict result;
  result["transactions"] = out.transactions.size();
  result["corrupted"] = corrupted;
  result["edges"] = world.graph.edges().size();
  return result;
}

std::vector<RoutedTrip> attach_short_routes(const std::vector<Transaction>& txns,
                                            const HighwayGraph& graph) {
  std::vector<RoutedTrip> routed;
  for (const auto& txn : txns) {
    auto candidates =
        enumerate_routes(graph, txn.entry_station, txn.exit_station, 3);
    if (candidates.empty()) continue;
    routed.push_back({make_trip(txn, 30), candidates.front()});
  }
  return routed;
}

py::dict pipeline_speedmap(const std::string& graph_csv,
                           const std::string& txn_csv,
                           const std::string& out_csv, std::uint64_t seed) {
  auto graph = HighwayGraph::load_file(graph_csv);
  auto parsed = parse_transactions_file(txn_csv, graph);
  auto routed = attach_short_routes(parsed.accepted, graph);
  CrowdSpeedConfig config;
  config.seed = seed;
  DeriveDiagnostics diag;
  auto map = estimate_slot_distributions(routed, graph, config, &diag);
  map.save_file(out_csv);
  py::dict result;
  result["accepted"] = parsed.accepted.size();
  result["rejected"] = parsed.rejected.size();
  result["direct_samples"] = diag.direct_samples;
  result["differenced_samples"] = diag.differenced_samples;
  return result;
}

py::dict pipeline_recover(const std::string& graph_csv,
                          const std::string& txn_csv,
                          const std::string& out_csv,
                          std::uint64_t node_budget) {
  auto graph = HighwayGraph::load_file(graph_csv);
  auto parsed = parse_transactions_file(txn_csv, graph);
  std::vector<Trip> trips;
  for (const auto& txn : parsed.accepted) trips.push_back(make_trip(txn, 10));
  RecoveryConfig config;
  config.node_budget = node_budget;
  config.max_route_edges = 3;
  auto result = recover_routes_and_speeds(trips, graph, config);
  std::ofstream out(out_csv);
  save_recovered(out, result);
  py::dict d;
  d["recovered"] = result.sequences.size();
  d["unrecoverable"] = result.unrecoverable.size();
  d["objective"] = result.objective;
  d["bounded"] = result.budget_exhausted;
  return d;
}

py::dict pipeline_train(const std::string& graph_csv,
                        const std::string& txn_csv,
                        const std::string& context_csv,
                        const std::string& speedmap_csv,
                        const std::string& recovered_csv,
                        const std::string& bundle_dir, int trees,
                        std::uint64_t seed) {
  auto graph = HighwayGraph::load_file(graph_csv);
  auto parsed = parse_transactions_file(txn_csv, graph);
  auto calendar = ContextCalendar::load_file(context_csv);
  auto speed_map = CrowdSpeedMap::load_file(speedmap_csv);
  std::ifstream rin(recovered_csv);
  auto recovered = load_recovered(rin);
  std::vector<Trip> trips;
  for (const auto& txn : parsed.accepted) trips.push_back(make_trip(txn, 30));
  PredictorConfig config;
  config.trees = trees;
  config.seed = seed;
  config.max_route_edges = 3;
  auto bundle = PredictorBundle::train(trips, recovered, speed_map, graph,
                                       calendar, config);
  bundle.save(bundle_dir);
  py::dict d;
  d["trips"] = trips.size();
  d["d_updates"] = bundle.d_update_count();
  d["r_updates"] = bundle.r_update_count();
  d["s_updates"] = bundle.s_update_count();
  return d;
}

py::dict pipeline_evaluate(const std::string& bundle_dir,
                           const std::string& traces_csv,
                           double threshold_m, double interval_s) {
  auto bundle = PredictorBundle::load(bundle_dir);
  std::ifstream tin(traces_csv);
  auto traces = load_traces(tin);
  for (auto& tr : traces) {
    tr.txn.vehicle_id = tr.vehicle_id;
    tr.txn.entry_station = bundle.graph().edge(tr.route.edges.front()).from;
    tr.txn.exit_station = bundle.graph().edge(tr.route.edges.back()).to;
    tr.txn.entry_time = tr.entry_time;
    tr.txn.exit_time = tr.exit_time;
    const auto* profile = bundle.profile(tr.vehicle_id);
    tr.txn.vehicle_type = profile ? profile->type : VehicleType::Car;
  }
  auto report = evaluate_bundle(bundle, traces, threshold_m, interval_s);
  py::dict d;
  d["trips"] = report.trips;
  d["destination_accuracy"] = report.destination_acc;
  d["route_accuracy"] = report.route_acc;
  d["speed_accuracy"] = report.speed_acc;
  d["location_accuracy_all"] = report.location_acc_all;
  d["location_accuracy_routed"] = report.location_acc_routed;
  d["emp_destination_accuracy"] = report.emp_destination_acc;
  d["emp_route_accuracy"] = report.emp_route_acc;
  d["emp_speed_accuracy"] = report.emp_speed_acc;
  return d;
}

}  // namespace

PYBIND11_MODULE(_tollcast, m) {
  m.doc() = "Highway mobility modeling from toll transactions";

  py::class_<HighwayGraph>(m, "HighwayGraph")
      .def_static("load_file", &HighwayGraph::load_file, py::arg("path"))
      .def("save_file", &HighwayGraph::save_file, py::arg("path"))
      .def("station_count",
           [](const HighwayGraph& g) { return g.stations().size(); })
      .def("edge_count", [](const HighwayGraph& g) { return g.edges().size(); })
      .def("edge_ids",
           [](const HighwayGraph& g) {
             std::vector<std::string> ids;
             for (const auto& e : g.edges()) ids.push_back(e.id);
             return ids;
           })
      .def("station_ids", [](const HighwayGraph& g) {
        std::vector<std::string> ids;
        for (const auto& s : g.stations()) ids.push_back(s.id);
        return ids;
      });

  m.def(
      "enumerate_routes",
      [](const HighwayGraph& g, const std::string& origin,
         const std::string& dest, int max_edges) {
        std::vector<std::vector<std::string>> out;
        for (const auto& r : enumerate_routes(g, origin, dest, max_edges))
          out.push_back(r.edges);
        return out;
      },
      py::arg("graph"), py::arg("origin"), py::arg("destination"),
      py::arg("max_edges") = kDefaultMaxRouteEdges);
  m.def(
      "route_length",
      [](const HighwayGraph& g, const std::vector<std::string>& edges) {
        return route_length(g, Route{edges});
      },
      py::arg("graph"), py::arg("edges"));
  m.def(
      "locate_on_route",
      [](const HighwayGraph& g, const std::vector<std::string>& edges,
         double offset_m) {
        auto loc = locate_on_route(g, Route{edges}, offset_m);
        return py::make_tuple(loc.edge_id, loc.offset_m, loc.arrived);
      },
      py::arg("graph"), py::arg("edges"), py::arg("offset_m"));

  m.def(
      "slot_of",
      [](const std::string& timestamp, int width_min) {
        return slot_of(parse_timestamp(timestamp), width_min).index;
      },
      py::arg("timestamp"), py::arg("width_min") = 30);

  m.def(
      "destination_entropy",
      [](const std::vector<std::string>& destinations) {
        return destination_entropy(trips_from_destinations(destinations));
      },
      py::arg("destinations"));
  m.def(
      "ndcg_rank_similarity",
      [](const std::vector<std::pair<std::string, double>>& reference,
         const std::vector<std::pair<std::string, double>>& other) {
        std::vector<RankedItem> ref, oth;
        for (const auto& [id, gain] : reference) ref.push_back({id, gain});
        for (const auto& [id, gain] : other) oth.push_back({id, gain});
        return ndcg_rank_similarity(ref, oth);
      },
      py::arg("reference"), py::arg("other"));
  m.def(
      "speed_std_variants",
      [](const std::vector<double>& speeds, double limit) {
        auto v = speed_std_variants(speeds, limit);
        return py::make_tuple(v.vs_limit, v.vs_historical, v.vs_trip);
      },
      py::arg("trip_speeds"), py::arg("speed_limit_kmh"));
  m.def(
      "pearson",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        return pearson(x, y);
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "ks_normality_test",
      [](const std::vector<double>& samples, double alpha) {
        auto report = ks_normality_test(samples, alpha);
        py::dict d;
        d["statistic"] = report.ks_statistic;
        d["p_value"] = report.p_value;
        d["accepted"] = report.accepted;
        d["insufficient"] = report.insufficient;
        return d;
      },
      py::arg("samples"), py::arg("alpha") = 0.05);
  m.def("confidence_weight", &confidence_weight, py::arg("duration_i_s"),
        py::arg("duration_j_s"), py::arg("edge_length_m"),
        py::arg("lambda_") = kDefaultConfidenceLambda);
  m.def(
      "fit_weighted_gmm",
      [](const std::vector<double>& values, const std::vector<double>& weights,
         int components,
         std::uint64_t seed) -> py::object {
        auto fit = fit_weighted_gmm(values, weights, components, seed);
        if (!fit) return py::none();
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& c : fit->params.components)
          out.emplace_back(c.weight, c.mean, c.variance);
        return py::cast(out);
      },
      py::arg("values"), py::arg("weights"), py::arg("components") = 2,
      py::arg("seed") = 1);
  m.def(
      "weighted_letter_values",
      [](const std::vector<double>& values, const std::vector<double>& weights) {
        auto lv = weighted_letter_values(values, weights);
        return py::make_tuple(lv.min, lv.lower_fourth, lv.median,
                              lv.upper_fourth, lv.max);
      },
      py::arg("values"), py::arg("weights"));

  m.def("speed_accuracy", &speed_accuracy, py::arg("predicted_kmh"),
        py::arg("actual_kmh"));
  m.def(
      "destination_accuracy",
      [](const std::vector<std::string>& pred,
         const std::vector<std::string>& truth) {
        return destination_accuracy(pred, truth);
      },
      py::arg("predictions"), py::arg("truths"));

  py::class_<MondrianForest>(m, "MondrianForest")
      .def(py::init([](const std::vector<std::string>& numeric,
                       const std::vector<std::pair<std::string, int>>&
                           categorical,
                       const std::string& task, int trees,
                       std::uint64_t seed) {
             FeatureSchema schema{numeric, categorical};
             ForestTask t = task == "regression" ? ForestTask::Regression
                                                 : ForestTask::Classification;
             return MondrianForest(schema, t, trees, seed);
           }),
           py::arg("numeric"),
           py::arg("categorical") = std::vector<std::pair<std::string, int>>{},
           py::arg("task") = "classification", py::arg("trees") = 25,
           py::arg("seed") = 1)
      .def(
          "update_class",
          [](MondrianForest& f, const std::vector<double>& numeric,
             const std::vector<int>& categorical, const std::string& label) {
            f.update(FeatureVector{numeric, categorical}, label);
          },
          py::arg("numeric"), py::arg("categorical"), py::arg("label"))
      .def(
          "update_value",
          [](MondrianForest& f, const std::vector<double>& numeric,
             const std::vector<int>& categorical, double y) {
            f.update(FeatureVector{numeric, categorical}, y);
          },
          py::arg("numeric"), py::arg("categorical"), py::arg("target"))
      .def(
          "predict_class",
          [](const MondrianForest& f, const std::vector<double>& numeric,
             const std::vector<int>& categorical) {
            return f.predict_class(FeatureVector{numeric, categorical});
          },
          py::arg("numeric"), py::arg("categorical"))
      .def(
          "predict_value",
          [](const MondrianForest& f, const std::vector<double>& numeric,
             const std::vector<int>& categorical) {
            auto p = f.predict_value(FeatureVector{numeric, categorical});
            return py::make_tuple(p.mean, p.variance);
          },
          py::arg("numeric"), py::arg("categorical"))
      .def("feature_importance", &MondrianForest::feature_importance)
      .def("update_count", &MondrianForest::update_count)
      .def("labels", &MondrianForest::labels)
      .def("save_file", &MondrianForest::save_file, py::arg("path"))
      .def_static("load_file", &MondrianForest::load_file, py::arg("path"));

  m.def("simulate", &simulate_files, py::arg("out_dir"),
        py::arg("stations") = 20, py::arg("vehicles") = 200,
        py::arg("days") = 1, py::arg("seed") = 1,
        py::arg("noise_free") = false, py::arg("corrupt_fraction") = 0.0);
  m.def("build_speed_map", &pipeline_speedmap, py::arg("graph_csv"),
        py::arg("transactions_csv"), py::arg("out_csv"), py::arg("seed") = 1);
  m.def("recover_trips", &pipeline_recover, py::arg("graph_csv"),
        py::arg("transactions_csv"), py::arg("out_csv"),
        py::arg("node_budget") = 100000);
  m.def("train_bundle", &pipeline_train, py::arg("graph_csv"),
        py::arg("transactions_csv"), py::arg("context_csv"),
        py::arg("speedmap_csv"), py::arg("recovered_csv"),
        py::arg("bundle_dir"), py::arg("trees") = 10, py::arg("seed") = 1);
  m.def("evaluate_bundle", &pipeline_evaluate, py::arg("bundle_dir"),
        py::arg("traces_csv"), py::arg("threshold_m") = 100.0,
        py::arg("interval_s") = 15.0);

  m.attr("__version__") = "0.1.0";
}
