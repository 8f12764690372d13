#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tollcast {

struct TollStation {
  std::string id;
  std::string name;
  double ramp_length_m = 0.0;
};

/// Directed highway segment between two adjacent toll stations.
struct Edge {
  std::string id;
  std::string from;
  std::string to;
  double length_m = 0.0;
  double speed_limit_kmh = 0.0;
};

/// Ordered sequence of adjacent edges. Routes are simple: no repeated edge.
struct Route {
  std::vector<std::string> edges;

  bool operator==(const Route& other) const { return edges == other.edges; }
};

struct LocationOnRoute {
  std::string edge_id;
  double offset_m = 0.0;  // within the edge
  bool arrived = false;
};

constexpr int kDefaultMaxRouteEdges = 8;

/// Toll-station network. Immutable after construction; all queries are pure.
class HighwayGraph {
 public:
  HighwayGraph() = default;
  HighwayGraph(std::vector<TollStation> stations, std::vector<Edge> edges);

  const std::vector<TollStation>& stations() const { return stations_; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool has_station(const std::string& id) const;
  bool has_edge(const std::string& id) const;
  std::size_t station_index(const std::string& id) const;  // IdentifierError
  std::size_t edge_index(const std::string& id) const;     // IdentifierError
  const TollStation& station(const std::string& id) const;
  const Edge& edge(const std::string& id) const;

  /// Outgoing edge indexes of a station, sorted by edge id.
  std::span<const std::size_t> out_edges(std::size_t station_idx) const;

  static HighwayGraph load(std::istream& in);
  static HighwayGraph load_file(const std::string& path);
  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;

 private:
  std::vector<TollStation> stations_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> station_idx_;
  std::unordered_map<std::string, std::size_t> edge_idx_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// All simple routes (no repeated edge) from origin to destination with at
/// most max_edges edges, sorted by total length, ties by edge-id sequence.
std::vector<Route> enumerate_routes(const HighwayGraph& graph,
                                    const std::string& origin,
                                    const std::string& destination,
                                    int max_edges = kDefaultMaxRouteEdges);

double route_length(const HighwayGraph& graph, const Route& route);

/// Throws std::invalid_argument if the route is empty, non-adjacent or
/// repeats an edge; IdentifierError for unknown edges.
void validate_route(const HighwayGraph& graph, const Route& route);

/// Maps an along-route offset to an edge and residual offset. Offsets past
/// the end clamp to the terminal point with arrived = true.
LocationOnRoute locate_on_route(const HighwayGraph& graph, const Route& route,
                                double offset_m);

/// Free-flow traversal time of the route at the edge speed limits, seconds.
double free_flow_time_s(const HighwayGraph& graph, const Route& route);

}  // namespace tollcast
