#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tollcast/graph.hpp"
#include "tollcast/ingest.hpp"
#include "tollcast/ks_test.hpp"

namespace tollcast {

struct DiscretizationConfig {
  int slot_width_min = 10;
  double segment_length_m = 1000.0;
  double speed_unit_kmh = 1.0;         // refinement grid
  double search_speed_unit_kmh = 5.0;  // coarse search grid
  double duration_slack_factor = 3.0;  // feasibility bound vs free-flow time
};

/// One discretized step: the vehicle occupies `segment` of `edge_id` during
/// `slot`, moving at `speed_kmh`.
struct State {
  int slot = 0;
  std::string edge_id;
  int segment = 0;
  double speed_kmh = 0.0;
};

struct StateSequence {
  std::string trip_id;
  Route route;
  std::vector<State> states;
  double total_time_s = 0.0;  // highway time implied by the speeds

  /// Per-edge speeds (constant within an edge), in route order.
  std::vector<double> edge_speeds_kmh(const HighwayGraph& graph) const;
  double mean_speed_kmh(const HighwayGraph& graph) const;
};

/// Piecewise-constant-speed sequences per candidate route whose travel time
/// matches the ramp-corrected trip duration within half a slot, enumerated
/// on the coarse speed grid. Exhaustive at that grid.
std::vector<StateSequence> candidate_state_sequences(
    const Trip& trip, const HighwayGraph& graph,
    std::span<const Route> candidate_routes, const DiscretizationConfig& cfg);

/// Builds the state sequence implied by fixed per-edge speeds.
StateSequence sequence_from_edge_speeds(const Trip& trip,
                                        const HighwayGraph& graph,
                                        const Route& route,
                                        std::span<const double> edge_speeds,
                                        const DiscretizationConfig& cfg);

/// Duration-matching refinement of a sequence's speeds on the fine grid.
StateSequence refine_to_fine_grid(const StateSequence& seq, const Trip& trip,
                                  const HighwayGraph& graph,
                                  const DiscretizationConfig& cfg);

struct GroupKey {
  std::string edge;
  int segment = 0;
  int slot = 0;
  auto operator<=>(const GroupKey&) const = default;
};

/// Incremental objective: accepted KS normality tests over populated
/// (segment x slot) speed groups plus the test over the population of
/// per-vehicle speed standard deviations. Only groups large enough to carry
/// test power enter the count.
class RecoveryObjective {
 public:
  explicit RecoveryObjective(double alpha) : alpha_(alpha) {}

  void add(const StateSequence& seq, const std::string& vehicle,
           const HighwayGraph& graph);
  void remove(const StateSequence& seq, const std::string& vehicle,
              const HighwayGraph& graph);
  double objective();
  std::vector<NormalityReport> reports(double alpha);

 private:
  double alpha_;
  std::map<GroupKey, std::vector<double>> groups_;
  std::map<GroupKey, int> contribution_;
  std::set<GroupKey> dirty_;
  double accepted_sum_ = 0.0;
  std::map<std::string, std::vector<double>> vehicle_speeds_;
  bool snorm_dirty_ = true;
  double snorm_contribution_ = 0.0;

  void refresh();
};

struct RecoveryConfig {
  DiscretizationConfig disc;
  double alpha = 0.05;
  std::size_t node_budget = 1'000'000;
  std::size_t max_candidates_per_trip = 64;
  int max_route_edges = kDefaultMaxRouteEdges;
};

struct RecoveryResult {
  std::map<std::string, StateSequence> sequences;  // by trip id
  std::vector<std::string> unrecoverable;
  std::vector<NormalityReport> reports;  // for the returned sequences
  double objective = 0.0;                // incumbent score at the search grid
  bool budget_exhausted = false;
};

/// Joint recovery: greedy-with-backtracking DFS over per-trip candidate
/// sequences, trips ordered by ambiguity, bounded by the node budget.
/// Winner speeds are refined to the fine grid by duration matching.
RecoveryResult recover_routes_and_speeds(std::span<const Trip> trips,
                                         const HighwayGraph& graph,
                                         const RecoveryConfig& config);

void save_recovered(std::ostream& out, const RecoveryResult& result);
std::map<std::string, StateSequence> load_recovered(std::istream& in);

}  // namespace tollcast
