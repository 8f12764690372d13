#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tollcast/graph.hpp"
#include "tollcast/ingest.hpp"

namespace tollcast {

/// Empirical destination distribution of an origin (optionally slot-scoped).
struct DistributionOverDestinations {
  std::string origin;
  std::optional<TimeSlot> slot;
  std::map<std::string, double> probabilities;  // sums to 1
};

DistributionOverDestinations destination_distribution(
    const std::string& origin, std::span<const Trip> trips,
    std::optional<TimeSlot> slot = std::nullopt);

/// Shannon entropy (bits) of the empirical destination distribution of a
/// vehicle history. Plug-in probabilities, no smoothing.
double destination_entropy(std::span<const Trip> history);

struct RankedItem {
  std::string id;
  double gain = 0.0;
};

/// DCG of `other` scored with the reference's gains, normalized by the DCG
/// of the reference ranking itself. 1 when identical, 0 when disjoint.
double ndcg_rank_similarity(std::span<const RankedItem> reference,
                            std::span<const RankedItem> other);

struct SpeedStdVariants {
  double vs_limit = 0.0;       // S(Limit)
  double vs_historical = 0.0;  // S(Historical)
  double vs_trip = 0.0;        // S(Trip), anchored at the latest trip's mean
};

/// Root-mean-square deviation of per-trip mean speeds around the speed
/// limit, the historical average and the current (latest) trip average.
SpeedStdVariants speed_std_variants(std::span<const double> trip_speeds,
                                    double speed_limit_kmh);

double pearson(std::span<const double> x, std::span<const double> y);

/// Per-slot fraction of network edges touched by routes of trips with at
/// most max_k edges. Indexed by slot; slot width taken from the trips.
std::vector<double> edge_coverage(std::span<const RoutedTrip> trips,
                                  const HighwayGraph& graph, int max_k);

}  // namespace tollcast
