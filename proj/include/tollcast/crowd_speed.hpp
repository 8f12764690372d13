#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tollcast/graph.hpp"
#include "tollcast/ingest.hpp"

namespace tollcast {

// Default confidence scale: a 10 km/h pseudo-speed difference between the
// two trips of a differenced sample yields weight 0.5.
inline const double kDefaultConfidenceLambda =
    (10.0 / 3.6) * (10.0 / 3.6) / 0.6931471805599453;

enum class SampleSource { DirectSingleEdge, Differenced };

struct DerivedDurationSample {
  std::string edge_id;
  TimeSlot slot;
  double duration_s = 0.0;
  double speed_kmh = 0.0;
  double confidence = 1.0;  // sample weight in (0, 1]
  SampleSource source = SampleSource::DirectSingleEdge;
  std::string trip_longer;   // trip uids for differenced samples
  std::string trip_shorter;
};

/// Trip duration with the estimated ramp time removed. Ramp time is the
/// trip duration apportioned to the entry/exit ramp lengths relative to the
/// total driven length.
double ramp_corrected_duration(const Trip& trip, const Route& route,
                               const HighwayGraph& graph);

/// Weight of a differenced sample: exp(-s^2/lambda) with
/// s = l_n/d_i - l_n/d_j in m/s. Equals 1 iff the durations match and
/// decreases with driver dissimilarity.
double confidence_weight(double duration_i_s, double duration_j_s,
                         double edge_length_m, double lambda);

struct DeriveDiagnostics {
  std::size_t direct_samples = 0;
  std::size_t differenced_samples = 0;
  std::size_t discarded_negative_difference = 0;
  std::size_t discarded_nonpositive_duration = 0;
  std::size_t discarded_implausible_speed = 0;
};

// Samples faster than this multiple of the edge limit are physically
// impossible and discarded (same bound the fitted mixture means obey).
constexpr double kMaxPlausibleSpeedFactor = 1.5;

/// Edge speed samples from trips with routes of at most 3 edges: direct
/// samples from single-edge trips and differenced samples from same-slot
/// trip pairs whose routes differ by exactly one extension edge.
std::vector<DerivedDurationSample> derive_edge_samples(
    std::span<const RoutedTrip> trips, const HighwayGraph& graph,
    double lambda = kDefaultConfidenceLambda,
    DeriveDiagnostics* diagnostics = nullptr);

struct GmmComponent {
  double weight = 1.0;
  double mean = 0.0;
  double variance = 1.0;
};

struct GmmParams {
  std::vector<GmmComponent> components;
  bool variance_floored = false;
};

struct GmmFit {
  GmmParams params;
  std::vector<double> log_likelihood_trace;  // one entry per EM iteration
};

constexpr double kGmmVarianceFloor = 1e-4;
constexpr double kGmmTolerance = 1e-6;
constexpr int kGmmMaxIterations = 200;

/// Weighted EM fit of a 1-D Gaussian mixture, k-means++-style seeded.
/// Returns nullopt when fewer distinct values than components exist.
std::optional<GmmFit> fit_weighted_gmm(std::span<const double> values,
                                       std::span<const double> weights,
                                       int components, std::uint64_t seed);

struct LetterValues {
  double min = 0.0;
  double lower_fourth = 0.0;
  double median = 0.0;
  double upper_fourth = 0.0;
  double max = 0.0;
};

/// Letter values of a weighted empirical distribution; quantile q is the
/// smallest value whose cumulative weight reaches q of the total.
LetterValues weighted_letter_values(std::span<const double> values,
                                    std::span<const double> weights);

struct EdgeSpeedDistribution {
  std::string edge_id;
  TimeSlot slot;
  std::vector<DerivedDurationSample> samples;
  std::optional<GmmParams> gmm;
  LetterValues letter_values;
  bool fallback = false;  // free-flow substitution at the speed limit
};

struct CrowdSpeedConfig {
  int slot_width_min = 30;
  std::size_t min_samples = 5;
  int gmm_components = 2;
  double lambda = kDefaultConfidenceLambda;
  std::uint64_t seed = 1;
};

/// Per (edge, slot) speed distributions covering every edge and every slot
/// of the day; sparse cells fall back to the free-flow speed.
class CrowdSpeedMap {
 public:
  using Key = std::pair<std::string, int>;  // (edge id, slot index)

  CrowdSpeedMap() = default;
  explicit CrowdSpeedMap(int slot_width_min) : slot_width_(slot_width_min) {}

  int slot_width_min() const { return slot_width_; }
  void insert(EdgeSpeedDistribution dist);
  const EdgeSpeedDistribution* find(const std::string& edge_id,
                                    int slot_index) const;
  /// Letter values for a cell; the speed-limit fallback is synthesized for
  /// edges the map has never seen.
  LetterValues letter_values_or_fallback(const HighwayGraph& graph,
                                         const std::string& edge_id,
                                         int slot_index) const;
  const std::map<Key, EdgeSpeedDistribution>& cells() const { return cells_; }

  void save(std::ostream& out) const;
  static CrowdSpeedMap load(std::istream& in);
  void save_file(const std::string& path) const;
  static CrowdSpeedMap load_file(const std::string& path);

 private:
  int slot_width_ = 30;
  std::map<Key, EdgeSpeedDistribution> cells_;
};

CrowdSpeedMap estimate_slot_distributions(std::span<const RoutedTrip> trips,
                                          const HighwayGraph& graph,
                                          const CrowdSpeedConfig& config,
                                          DeriveDiagnostics* diag = nullptr);

}  // namespace tollcast
