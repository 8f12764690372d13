#include "tollcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace tollcast {

DistributionOverDestinations destination_distribution(
    const std::string& origin, std::span<const Trip> trips,
    std::optional<TimeSlot> slot) {
  DistributionOverDestinations dist;
  dist.origin = origin;
  dist.slot = slot;
  double total = 0.0;
  for (const auto& t : trips) {
    if (t.txn.entry_station != origin) continue;
    if (slot && !(t.origin_slot == *slot)) continue;
    dist.probabilities[t.txn.exit_station] += 1.0;
    total += 1.0;
  }
  for (auto& [dest, p] : dist.probabilities) p /= total;
  return dist;
}

double destination_entropy(std::span<const Trip> history) {
  if (history.empty())
    throw std::invalid_argument("entropy of empty history is undefined");
  std::map<std::string, double> counts;
  for (const auto& t : history) counts[t.txn.exit_station] += 1.0;
  double n = static_cast<double>(history.size());
  double h = 0.0;
  for (const auto& [dest, c] : counts) {
    double p = c / n;
    h -= p * std::log2(p);
  }
  return h;
}

double ndcg_rank_similarity(std::span<const RankedItem> reference,
                            std::span<const RankedItem> other) {
  if (reference.empty() || other.empty())
    throw std::invalid_argument("ndcg of empty ranking is undefined");
  std::map<std::string, double> gains;
  for (const auto& item : reference) {
    if (item.gain < 0) throw std::invalid_argument("negative gain");
    gains[item.id] = item.gain;
  }
  auto dcg = [&](auto&& ids) {
    double v = 0.0;
    std::size_t rank = 1;
    for (const auto& id : ids) {
      auto it = gains.find(id);
      double g = (it == gains.end()) ? 0.0 : it->second;
      v += g / std::log2(static_cast<double>(rank) + 1.0);
      ++rank;
    }
    return v;
  };
  std::vector<std::string> ref_ids, other_ids;
  for (const auto& i : reference) ref_ids.push_back(i.id);
  for (const auto& i : other) other_ids.push_back(i.id);
  double ideal = dcg(ref_ids);
  if (ideal == 0.0)
    throw std::invalid_argument("reference ranking has zero total gain");
  return dcg(other_ids) / ideal;
}

SpeedStdVariants speed_std_variants(std::span<const double> trip_speeds,
                                    double speed_limit_kmh) {
  if (trip_speeds.size() < 2)
    throw std::invalid_argument("speed STD variants need at least 2 samples");
  if (speed_limit_kmh <= 0)
    throw std::invalid_argument("speed limit must be positive");
  double n = static_cast<double>(trip_speeds.size());
  double mean = 0.0;
  for (double v : trip_speeds) mean += v;
  mean /= n;
  double current = trip_speeds.back();
  auto rms_about = [&](double center) {
    double s = 0.0;
    for (double v : trip_speeds) s += (v - center) * (v - center);
    return std::sqrt(s / n);
  };
  return {rms_about(speed_limit_kmh), rms_about(mean), rms_about(current)};
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("pearson needs equal-length samples");
  if (x.size() < 2) throw std::invalid_argument("pearson needs >= 2 samples");
  double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::domain_error("pearson undefined for zero-variance sample");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> edge_coverage(std::span<const RoutedTrip> trips,
                                  const HighwayGraph& graph, int max_k) {
  if (trips.empty()) return {};
  int width = trips.front().trip.origin_slot.width_min;
  int slots = kMinutesPerDay / width;
  std::vector<std::set<std::string>> covered(slots);
  for (const auto& rt : trips) {
    if (static_cast<int>(rt.route.edges.size()) > max_k) continue;
    auto& cell = covered[rt.trip.origin_slot.index];
    for (const auto& e : rt.route.edges) cell.insert(e);
  }
  double total = static_cast<double>(graph.edges().size());
  std::vector<double> fractions(slots, 0.0);
  for (int s = 0; s < slots; ++s)
    fractions[s] = static_cast<double>(covered[s].size()) / total;
  return fractions;
}

}  // namespace tollcast
