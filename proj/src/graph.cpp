#include "tollcast/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "tollcast/errors.hpp"

namespace tollcast {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

HighwayGraph::HighwayGraph(std::vector<TollStation> stations,
                           std::vector<Edge> edges)
    : stations_(std::move(stations)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < stations_.size(); ++i) {
    const auto& s = stations_[i];
    if (s.id.empty()) throw std::invalid_argument("empty station id");
    if (s.ramp_length_m < 0)
      throw std::invalid_argument("negative ramp length at " + s.id);
    if (!station_idx_.emplace(s.id, i).second)
      throw std::invalid_argument("duplicate station id " + s.id);
  }
  adjacency_.resize(stations_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    if (e.id.empty()) throw std::invalid_argument("empty edge id");
    if (!edge_idx_.emplace(e.id, i).second)
      throw std::invalid_argument("duplicate edge id " + e.id);
    if (e.length_m <= 0)
      throw std::invalid_argument("non-positive length on edge " + e.id);
    if (e.speed_limit_kmh <= 0)
      throw std::invalid_argument("non-positive speed limit on edge " + e.id);
    if (e.from == e.to)
      throw std::invalid_argument("self-loop edge " + e.id);
    auto fit = station_idx_.find(e.from);
    auto tit = station_idx_.find(e.to);
    if (fit == station_idx_.end() || tit == station_idx_.end())
      throw IdentifierError("edge " + e.id + " references unknown station");
    adjacency_[fit->second].push_back(i);
  }
  for (auto& out : adjacency_) {
    std::sort(out.begin(), out.end(), [this](std::size_t a, std::size_t b) {
      return edges_[a].id < edges_[b].id;
    });
  }

  // Weak connectivity over the undirected view; orphan stations are rejected.
  if (stations_.size() > 1) {
    std::vector<std::vector<std::size_t>> undirected(stations_.size());
    for (const auto& e : edges_) {
      auto a = station_idx_.at(e.from);
      auto b = station_idx_.at(e.to);
      undirected[a].push_back(b);
      undirected[b].push_back(a);
    }
    std::vector<char> seen(stations_.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : undirected[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++visited;
          stack.push_back(w);
        }
      }
    }
    if (visited != stations_.size())
      throw std::invalid_argument("graph is not weakly connected");
  }
}

bool HighwayGraph::has_station(const std::string& id) const {
  return station_idx_.count(id) != 0;
}

bool HighwayGraph::has_edge(const std::string& id) const {
  return edge_idx_.count(id) != 0;
}

std::size_t HighwayGraph::station_index(const std::string& id) const {
  auto it = station_idx_.find(id);
  if (it == station_idx_.end()) throw IdentifierError("unknown station " + id);
  return it->second;
}

std::size_t HighwayGraph::edge_index(const std::string& id) const {
  auto it = edge_idx_.find(id);
  if (it == edge_idx_.end()) throw IdentifierError("unknown edge " + id);
  return it->second;
}

const TollStation& HighwayGraph::station(const std::string& id) const {
  return stations_[station_index(id)];
}

const Edge& HighwayGraph::edge(const std::string& id) const {
  return edges_[edge_index(id)];
}

std::span<const std::size_t> HighwayGraph::out_edges(
    std::size_t station_idx) const {
  return adjacency_.at(station_idx);
}

HighwayGraph HighwayGraph::load(std::istream& in) {
  std::vector<TollStation> stations;
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto f = split_csv(line);
    if (f[0] == "station") {
      if (f.size() != 4)
        throw std::invalid_argument("graph line " + std::to_string(line_no) +
                                    ": station record needs 4 fields");
      stations.push_back({f[1], f[2], std::stod(f[3])});
    } else if (f[0] == "edge") {
      if (f.size() != 6)
        throw std::invalid_argument("graph line " + std::to_string(line_no) +
                                    ": edge record needs 6 fields");
      edges.push_back({f[1], f[2], f[3], std::stod(f[4]), std::stod(f[5])});
    } else {
      throw std::invalid_argument("graph line " + std::to_string(line_no) +
                                  ": unknown record type '" + f[0] + "'");
    }
  }
  return HighwayGraph(std::move(stations), std::move(edges));
}

HighwayGraph HighwayGraph::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file " + path);
  return load(in);
}

void HighwayGraph::save(std::ostream& out) const {
  char buf[256];
  for (const auto& s : stations_) {
    std::snprintf(buf, sizeof(buf), "station,%s,%s,%.3f\n", s.id.c_str(),
                  s.name.c_str(), s.ramp_length_m);
    out << buf;
  }
  for (const auto& e : edges_) {
    std::snprintf(buf, sizeof(buf), "edge,%s,%s,%s,%.3f,%.3f\n", e.id.c_str(),
                  e.from.c_str(), e.to.c_str(), e.length_m, e.speed_limit_kmh);
    out << buf;
  }
}

void HighwayGraph::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file " + path);
  save(out);
}

std::vector<Route> enumerate_routes(const HighwayGraph& graph,
                                    const std::string& origin,
                                    const std::string& destination,
                                    int max_edges) {
  if (origin == destination)
    throw std::invalid_argument("origin equals destination");
  if (max_edges < 1) throw std::invalid_argument("max_edges must be >= 1");
  std::size_t start = graph.station_index(origin);
  std::size_t goal = graph.station_index(destination);

  std::vector<Route> found;
  std::vector<std::size_t> path;
  std::vector<char> used(graph.edges().size(), 0);

  std::function<void(std::size_t)> dfs = [&](std::size_t station) {
    if (station == goal) {
      Route r;
      r.edges.reserve(path.size());
      for (auto ei : path) r.edges.push_back(graph.edges()[ei].id);
      found.push_back(std::move(r));
      return;
    }
    if (path.size() == static_cast<std::size_t>(max_edges)) return;
    for (auto ei : graph.out_edges(station)) {
      if (used[ei]) continue;
      used[ei] = 1;
      path.push_back(ei);
      dfs(graph.station_index(graph.edges()[ei].to));
      path.pop_back();
      used[ei] = 0;
    }
  };
  dfs(start);

  std::sort(found.begin(), found.end(), [&](const Route& a, const Route& b) {
    double la = route_length(graph, a);
    double lb = route_length(graph, b);
    if (la != lb) return la < lb;
    return a.edges < b.edges;
  });
  return found;
}

double route_length(const HighwayGraph& graph, const Route& route) {
  double total = 0.0;
  for (const auto& id : route.edges) total += graph.edge(id).length_m;
  return total;
}

void validate_route(const HighwayGraph& graph, const Route& route) {
  if (route.edges.empty()) throw std::invalid_argument("empty route");
  for (std::size_t i = 0; i < route.edges.size(); ++i) {
    const Edge& e = graph.edge(route.edges[i]);
    if (i > 0 && graph.edge(route.edges[i - 1]).to != e.from)
      throw std::invalid_argument("route edges not adjacent at position " +
                                  std::to_string(i));
    for (std::size_t j = i + 1; j < route.edges.size(); ++j)
      if (route.edges[i] == route.edges[j])
        throw std::invalid_argument("route repeats edge " + route.edges[i]);
  }
}

LocationOnRoute locate_on_route(const HighwayGraph& graph, const Route& route,
                                double offset_m) {
  validate_route(graph, route);
  if (offset_m < 0) throw std::invalid_argument("negative route offset");
  // Accumulated the same way as route_length so the terminal comparison is
  // exact for offset == route_length(route).
  double total = route_length(graph, route);
  if (offset_m >= total) {
    const Edge& last = graph.edge(route.edges.back());
    return {last.id, last.length_m, true};
  }
  double remaining = offset_m;
  for (const auto& id : route.edges) {
    const Edge& e = graph.edge(id);
    if (remaining < e.length_m) return {e.id, remaining, false};
    remaining -= e.length_m;
  }
  const Edge& last = graph.edge(route.edges.back());
  return {last.id, last.length_m, true};
}

double free_flow_time_s(const HighwayGraph& graph, const Route& route) {
  double t = 0.0;
  for (const auto& id : route.edges) {
    const Edge& e = graph.edge(id);
    t += e.length_m / (e.speed_limit_kmh / 3.6);
  }
  return t;
}

}  // namespace tollcast
