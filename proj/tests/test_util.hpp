#pragma once

#include <random>
#include <string>
#include <vector>

#include "tollcast/graph.hpp"
#include "tollcast/ingest.hpp"

namespace tollcast::testutil {

/// Linear chain S1 -> S2 -> ... -> Sn with the given edge lengths (meters).
inline HighwayGraph chain_graph(std::vector<double> lengths,
                                double limit_kmh = 120.0,
                                double ramp_m = 0.0) {
  std::vector<TollStation> stations;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i <= lengths.size(); ++i)
    stations.push_back({"S" + std::to_string(i + 1), "", ramp_m});
  for (std::size_t i = 0; i < lengths.size(); ++i)
    edges.push_back({"E" + std::to_string(i + 1), "S" + std::to_string(i + 1),
                     "S" + std::to_string(i + 2), lengths[i], limit_kmh});
  return HighwayGraph(std::move(stations), std::move(edges));
}

inline Transaction txn(const std::string& vehicle, const std::string& from,
                       const std::string& to, Timestamp entry,
                       double duration_s,
                       VehicleType type = VehicleType::Car) {
  Transaction t;
  t.vehicle_id = vehicle;
  t.vehicle_type = type;
  t.entry_station = from;
  t.exit_station = to;
  t.entry_time = entry;
  t.exit_time = entry + static_cast<Timestamp>(duration_s);
  t.axle_count = 2;
  t.weight_kg = 1500;
  return t;
}

/// Random connected directed graph for enumeration oracles.
inline HighwayGraph random_graph(int stations, int extra_links,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TollStation> st;
  for (int i = 0; i < stations; ++i)
    st.push_back({"S" + std::to_string(i + 1), "", 0.0});
  std::vector<Edge> edges;
  int counter = 0;
  auto add_link = [&](int a, int b) {
    double len =
        std::uniform_real_distribution<double>(2000.0, 12000.0)(rng);
    edges.push_back({"E" + std::to_string(++counter),
                     "S" + std::to_string(a + 1), "S" + std::to_string(b + 1),
                     len, 120.0});
    edges.push_back({"E" + std::to_string(++counter),
                     "S" + std::to_string(b + 1), "S" + std::to_string(a + 1),
                     len, 120.0});
  };
  for (int i = 1; i < stations; ++i)
    add_link(i, std::uniform_int_distribution<int>(0, i - 1)(rng));
  for (int k = 0; k < extra_links; ++k) {
    int a = std::uniform_int_distribution<int>(0, stations - 1)(rng);
    int b = std::uniform_int_distribution<int>(0, stations - 1)(rng);
    if (a != b) add_link(a, b);
  }
  return HighwayGraph(std::move(st), std::move(edges));
}

}  // namespace tollcast::testutil
