#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tollcast/config.hpp"
#include "tollcast/crowd_speed.hpp"
#include "tollcast/graph.hpp"
#include "tollcast/ingest.hpp"
#include "tollcast/locator.hpp"
#include "tollcast/predictors.hpp"
#include "tollcast/recovery.hpp"
#include "tollcast/sim.hpp"
#include "tollcast/stats.hpp"

namespace fs = std::filesystem;
using namespace tollcast;

namespace {

std::ofstream open_artifact(const RunConfig& config, const std::string& path) {
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? "."
                             : fs::path(path).parent_path().string());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << artifact_header(config);
  return out;
}

std::string default_path(const RunConfig& config, const std::string& name,
                         const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  return config.out_dir + "/" + name;
}

SimConfig sim_config_from(const RunConfig& config) {
  SimConfig sim;
  sim.stations = config.sim_stations;
  sim.edge_density = config.sim_edge_density;
  sim.days = config.sim_days;
  sim.vehicles = config.sim_vehicles;
  sim.max_route_edges = config.sim_max_route_edges;
  sim.route_stickiness = config.sim_stickiness;
  sim.ramp_min_m = config.sim_ramp_min_m;
  sim.ramp_max_m = config.sim_ramp_max_m;
  sim.noise_free = config.sim_noise_free;
  return sim;
}

/// Route attachment for crowd speed estimation: short trips are assumed to
/// take the shortest candidate; only trips whose shortest route has at most
/// three edges contribute samples.
std::vector<RoutedTrip> routed_short_trips(std::span<const Transaction> txns,
                                           const HighwayGraph& graph,
                                           int slot_width_min) {
  std::vector<RoutedTrip> routed;
  for (const auto& txn : txns) {
    auto candidates =
        enumerate_routes(graph, txn.entry_station, txn.exit_station, 3);
    if (candidates.empty()) continue;
    routed.push_back({make_trip(txn, slot_width_min), candidates.front()});
  }
  return routed;
}

int cmd_simulate(const RunConfig& config) {
  auto world = generate_world(sim_config_from(config), config.seed);
  auto output = simulate_days(world, config.sim_days, config.seed);

  {
    auto out = open_artifact(config, default_path(config, "graph.csv", ""));
    world.graph.save(out);
  }
  {
    auto out = open_artifact(config, default_path(config, "context.csv", ""));
    world.calendar.save(out);
  }
  std::size_t corrupted;
  {
    auto out =
        open_artifact(config, default_path(config, "transactions.csv", ""));
    corrupted = write_transactions(out, output.transactions,
                                   config.sim_corrupt_fraction, config.seed);
  }
  if (config.sim_write_traces) {
    auto out = open_artifact(config, default_path(config, "traces.csv", ""));
    write_traces(out, output.traces);
  }
  std::cout << "simulate: transactions=" << output.transactions.size()
            << " corrupted=" << corrupted
            << " vehicles=" << world.population.size()
            << " edges=" << world.graph.edges().size() << "\n";
  return 0;
}

int cmd_ingest(const RunConfig& config) {
  auto graph = HighwayGraph::load_file(config.graph_path);
  auto result = parse_transactions_file(config.transactions_path, graph);
  {
    auto out = open_artifact(config, default_path(config, "accepted.csv", ""));
    serialize_transactions(out, result.accepted);
  }
  {
    auto out = open_artifact(config, default_path(config, "rejects.csv", ""));
    out << "line_no,reason\n";
    for (const auto& r : result.rejected)
      out << r.line_no << ',' << r.reason << "\n";
  }
  std::cout << "ingest: accepted=" << result.accepted.size()
            << " rejected=" << result.rejected.size() << "\n";
  return 0;
}

int cmd_speedmap(const RunConfig& config) {
  auto graph = HighwayGraph::load_file(config.graph_path);
  auto parsed = parse_transactions_file(config.transactions_path, graph);
  auto routed = routed_short_trips(parsed.accepted, graph,
                                   config.slot_width_min);
  CrowdSpeedConfig crowd;
  crowd.slot_width_min = config.slot_width_min;
  crowd.min_samples = static_cast<std::size_t>(config.min_samples);
  crowd.gmm_components = config.gmm_components;
  crowd.lambda = config.lambda;
  crowd.seed = config.seed;
  DeriveDiagnostics diag;
  auto map = estimate_slot_distributions(routed, graph, crowd, &diag);
  {
    auto out = open_artifact(config, default_path(config, "speedmap.csv", ""));
    map.save(out);
  }
  std::cout << "speedmap: direct=" << diag.direct_samples
            << " differenced=" << diag.differenced_samples
            << " discarded_negative=" << diag.discarded_negative_difference
            << " discarded_nonpositive=" << diag.discarded_nonpositive_duration
            << "\n";
  return 0;
}

int cmd_recover(const RunConfig& config) {
  auto graph = HighwayGraph::load_file(config.graph_path);
  auto parsed = parse_transactions_file(config.transactions_path, graph);
  std::vector<Trip> trips;
  for (const auto& txn : parsed.accepted)
    trips.push_back(make_trip(txn, config.recovery_slot_width_min));
  RecoveryConfig rc;
  rc.disc.slot_width_min = config.recovery_slot_width_min;
  rc.disc.segment_length_m = config.segment_length_m;
  rc.disc.speed_unit_kmh = config.speed_unit_kmh;
  rc.disc.search_speed_unit_kmh = config.search_speed_unit_kmh;
  rc.disc.duration_slack_factor = config.duration_slack_factor;
  rc.alpha = config.alpha;
  rc.node_budget = config.node_budget;
  rc.max_candidates_per_trip =
      static_cast<std::size_t>(config.max_candidates_per_trip);
  rc.max_route_edges = config.max_route_edges;
  auto result = recover_routes_and_speeds(trips, graph, rc);
  {
    auto out = open_artifact(config, default_path(config, "recovered.csv", ""));
    save_recovered(out, result);
  }
  {
    auto out =
        open_artifact(config, default_path(config, "normality_reports.csv", ""));
    out << "group,samples,ks_statistic,p_value,accepted,insufficient\n";
    char buf[64];
    for (const auto& r : result.reports) {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f", r.ks_statistic, r.p_value);
      out << r.group << ',' << r.sample_count << ',' << buf << ','
          << (r.accepted ? 1 : 0) << ',' << (r.insufficient ? 1 : 0) << "\n";
    }
  }
  std::cout << "recover: trips=" << result.sequences.size()
            << " unrecoverable=" << result.unrecoverable.size()
            << " objective=" << result.objective
            << " bounded=" << (result.budget_exhausted ? 1 : 0) << "\n";
  return 0;
}

int cmd_train(const RunConfig& config) {
  std::string speedmap_path = default_path(config, "speedmap.csv", "");
  std::string recovered_path = default_path(config, "recovered.csv", "");
  if (!fs::exists(recovered_path))
    throw std::runtime_error("missing recovered trips (" + recovered_path +
                             "); run the recover step first");
  if (!fs::exists(speedmap_path))
    throw std::runtime_error("missing speed map (" + speedmap_path +
                             "); run the speedmap step first");
  auto graph = HighwayGraph::load_file(config.graph_path);
  auto calendar = ContextCalendar::load_file(config.context_path);
  auto parsed = parse_transactions_file(config.transactions_path, graph);
  auto speed_map = CrowdSpeedMap::load_file(speedmap_path);
  std::ifstream rin(recovered_path);
  auto recovered = load_recovered(rin);

  std::vector<Trip> trips;
  for (const auto& txn : parsed.accepted)
    trips.push_back(make_trip(txn, config.slot_width_min));

  PredictorConfig pc;
  pc.slot_width_min = config.slot_width_min;
  pc.hist_top_k = config.hist_top_k;
  pc.crowd_top_k = config.hist_top_k;
  pc.trees = config.trees;
  pc.seed = config.seed;
  pc.max_route_edges = config.max_route_edges;
  pc.config_hash = config.hash();
  auto bundle =
      PredictorBundle::train(trips, recovered, speed_map, graph, calendar, pc);
  std::string dir = config.bundle_dir.empty()
                        ? config.out_dir + "/bundle"
                        : config.bundle_dir;
  bundle.save(dir);
  std::cout << "train: trips=" << trips.size()
            << " d_updates=" << bundle.d_update_count()
            << " r_updates=" << bundle.r_update_count()
            << " s_updates=" << bundle.s_update_count() << " bundle=" << dir
            << "\n";
  return 0;
}

int cmd_predict(const RunConfig& config) {
  std::string dir = config.bundle_dir.empty()
                        ? config.out_dir + "/bundle"
                        : config.bundle_dir;
  auto bundle = PredictorBundle::load(dir);
  auto parsed =
      parse_transactions_file(config.transactions_path, bundle.graph());
  std::vector<PredictedTrajectory> trajectories;
  for (const auto& txn : parsed.accepted) {
    auto traj = predict_locations(bundle, txn.vehicle_id, txn.entry_station,
                                  txn.entry_time, config.interval_s);
    trajectories.push_back(std::move(traj));
  }
  {
    auto out =
        open_artifact(config, default_path(config, "trajectories.csv", ""));
    write_trajectories(out, trajectories);
  }
  std::cout << "predict: trips=" << trajectories.size() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& config) {
  std::string dir = config.bundle_dir.empty()
                        ? config.out_dir + "/bundle"
                        : config.bundle_dir;
  auto bundle = PredictorBundle::load(dir);
  std::ifstream tin(config.traces_path);
  if (!tin)
    throw std::runtime_error("cannot open traces file " + config.traces_path);
  auto traces = load_traces(tin);
  for (auto& tr : traces) tr.txn = [&] {
    Transaction txn;
    txn.vehicle_id = tr.vehicle_id;
    txn.entry_station = bundle.graph().edge(tr.route.edges.front()).from;
    txn.exit_station = bundle.graph().edge(tr.route.edges.back()).to;
    txn.entry_time = tr.entry_time;
    txn.exit_time = tr.exit_time;
    const auto* profile = bundle.profile(tr.vehicle_id);
    txn.vehicle_type = profile ? profile->type : VehicleType::Car;
    return txn;
  }();
  auto report = evaluate_bundle(bundle, traces, config.threshold_m,
                                config.interval_s);
  {
    auto out = open_artifact(config, default_path(config, "report.csv", ""));
    write_report(out, report);
  }
  double primary = config.eval_mode == "routed" ? report.location_acc_routed
                                                : report.location_acc_all;
  std::cout << "evaluate: trips=" << report.trips
            << " destination=" << report.destination_acc
            << " route=" << report.route_acc << " speed=" << report.speed_acc
            << " location(" << config.eval_mode << ")=" << primary << "\n";
  return 0;
}

int cmd_stats(const RunConfig& config) {
  auto graph = HighwayGraph::load_file(config.graph_path);
  auto parsed = parse_transactions_file(config.transactions_path, graph);
  auto history = build_vehicle_history(parsed.accepted, config.slot_width_min);

  {
    auto out =
        open_artifact(config, default_path(config, "stats_entropy.csv", ""));
    out << "vehicle_id,trips,entropy_bits\n";
    char buf[32];
    for (const auto& [vid, trips] : history) {
      std::snprintf(buf, sizeof(buf), "%.6f", destination_entropy(trips));
      out << vid << ',' << trips.size() << ',' << buf << "\n";
    }
  }
  {
    auto routed = routed_short_trips(parsed.accepted, graph,
                                     config.slot_width_min);
    auto coverage = edge_coverage(routed, graph, 3);
    auto out =
        open_artifact(config, default_path(config, "stats_coverage.csv", ""));
    out << "slot,coverage\n";
    char buf[32];
    for (std::size_t s = 0; s < coverage.size(); ++s) {
      std::snprintf(buf, sizeof(buf), "%.6f", coverage[s]);
      out << s << ',' << buf << "\n";
    }
  }
  {
    // trip length in edges, via the shortest candidate route
    std::map<std::size_t, std::size_t> histogram;
    for (const auto& txn : parsed.accepted) {
      auto candidates = enumerate_routes(graph, txn.entry_station,
                                         txn.exit_station,
                                         config.max_route_edges);
      if (!candidates.empty()) ++histogram[candidates.front().edges.size()];
    }
    auto out =
        open_artifact(config, default_path(config, "stats_trip_edges.csv", ""));
    out << "edges,trips\n";
    for (const auto& [edges, count] : histogram)
      out << edges << ',' << count << "\n";
  }
  if (!config.context_path.empty()) {
    // Context impact: per-slot NDCG of top-10 destination rankings on
    // weekends/holidays against regular weekdays.
    auto calendar = ContextCalendar::load_file(config.context_path);
    int slots = kMinutesPerDay / config.slot_width_min;
    auto ranking_for = [&](const std::string& origin, int slot,
                           int context) {  // 0 regular, 1 weekend, 2 holiday
      std::map<std::string, std::int64_t> counts;
      for (const auto& txn : parsed.accepted) {
        if (txn.entry_station != origin) continue;
        if (slot_of(txn.entry_time, config.slot_width_min).index != slot)
          continue;
        ContextRecord ctx = calendar.at_time(txn.entry_time);
        int c = ctx.is_holiday ? 2 : (ctx.is_weekend ? 1 : 0);
        if (c != context) continue;
        counts[txn.exit_station] += 1;
      }
      std::vector<RankedItem> items;
      for (const auto& [dest, c] : counts)
        items.push_back({dest, static_cast<double>(c)});
      std::sort(items.begin(), items.end(),
                [](const RankedItem& a, const RankedItem& b) {
                  if (a.gain != b.gain) return a.gain > b.gain;
                  return a.id < b.id;
                });
      if (items.size() > 10) items.resize(10);
      return items;
    };
    auto out =
        open_artifact(config, default_path(config, "stats_ndcg.csv", ""));
    out << "context,slot,mean_ndcg,origins\n";
    char buf[32];
    for (int context : {1, 2}) {
      for (int s = 0; s < slots; ++s) {
        double sum = 0.0;
        int n = 0;
        for (const auto& st : graph.stations()) {
          auto reference = ranking_for(st.id, s, 0);
          auto other = ranking_for(st.id, s, context);
          if (reference.empty() || other.empty()) continue;
          sum += ndcg_rank_similarity(reference, other);
          ++n;
        }
        if (n == 0) continue;
        std::snprintf(buf, sizeof(buf), "%.6f", sum / n);
        out << (context == 1 ? "weekend" : "holiday") << ',' << s << ',' << buf
            << ',' << n << "\n";
      }
    }
  }
  std::cout << "stats: vehicles=" << history.size()
            << " transactions=" << parsed.accepted.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Highway mobility modeling from toll transactions"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--set", overrides, "override a config key (key=value)");

  std::map<std::string, std::string> flag_paths;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--graph", flag_paths["graph"], "graph file");
    cmd->add_option("--transactions", flag_paths["transactions"],
                    "transaction file");
    cmd->add_option("--context", flag_paths["context"], "context file");
    cmd->add_option("--traces", flag_paths["traces"], "ground-truth traces");
    cmd->add_option("--bundle", flag_paths["bundle"], "predictor bundle dir");
    cmd->add_option("--out", flag_paths["out"], "output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic world");
  auto* ingest = app.add_subcommand("ingest", "parse and validate transactions");
  auto* speedmap =
      app.add_subcommand("speedmap", "estimate crowd speed distributions");
  auto* recover =
      app.add_subcommand("recover", "recover historical routes and speeds");
  auto* train = app.add_subcommand("train", "train the predictor bundle");
  auto* predict =
      app.add_subcommand("predict", "predict real-time locations");
  auto* evaluate = app.add_subcommand("evaluate", "score against ground truth");
  auto* stats = app.add_subcommand("stats", "mobility statistics tables");
  for (auto* cmd :
       {simulate, ingest, speedmap, recover, train, predict, evaluate, stats})
    add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config;
    if (!config_path.empty()) config = RunConfig::from_file(config_path);
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("--set expects key=value, got " + kv);
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : flag_paths)
      if (!value.empty()) config.set(key, value);
    config.validate();
    fs::create_directories(config.out_dir);

    if (*simulate) return cmd_simulate(config);
    if (*ingest) return cmd_ingest(config);
    if (*speedmap) return cmd_speedmap(config);
    if (*recover) return cmd_recover(config);
    if (*train) return cmd_train(config);
    if (*predict) return cmd_predict(config);
    if (*evaluate) return cmd_evaluate(config);
    if (*stats) return cmd_stats(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
