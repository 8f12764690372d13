#include "tollcast/crowd_speed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace tollcast {

namespace {

constexpr double kMinUsableDurationS = 1.0;  // seconds resolution of the data

double speed_kmh_from(double length_m, double duration_s) {
  return (length_m / 1000.0) / (duration_s / 3600.0);
}

std::string route_key(std::span<const std::string> edges) {
  std::string key;
  for (const auto& e : edges) {
    key += e;
    key += '|';
  }
  return key;
}

std::uint64_t fnv1a(const std::string& text, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

double ramp_corrected_duration(const Trip& trip, const Route& route,
                               const HighwayGraph& graph) {
  validate_route(graph, route);
  const Edge& first = graph.edge(route.edges.front());
  const Edge& last = graph.edge(route.edges.back());
  if (first.from != trip.txn.entry_station ||
      last.to != trip.txn.exit_station)
    throw std::invalid_argument("route endpoints do not match trip stations");
  double ramps = graph.station(trip.txn.entry_station).ramp_length_m +
                 graph.station(trip.txn.exit_station).ramp_length_m;
  if (ramps == 0.0) return trip.duration_s;
  double highway = route_length(graph, route);
  return trip.duration_s * highway / (highway + ramps);
}

double confidence_weight(double duration_i_s, double duration_j_s,
                         double edge_length_m, double lambda) {
  if (duration_i_s <= 0 || duration_j_s <= 0)
    throw std::domain_error("confidence needs positive durations");
  if (lambda <= 0) throw std::domain_error("lambda must be positive");
  double s = edge_length_m / duration_i_s - edge_length_m / duration_j_s;
  // floored so extreme pairs keep a representable positive weight
  return std::max(std::exp(-s * s / lambda), 1e-30);
}

std::vector<DerivedDurationSample> derive_edge_samples(
    std::span<const RoutedTrip> trips, const HighwayGraph& graph,
    double lambda, DeriveDiagnostics* diagnostics) {
  DeriveDiagnostics local;
  DeriveDiagnostics& diag = diagnostics ? *diagnostics : local;

  struct Usable {
    const RoutedTrip* rt;
    double corrected_s;
  };
  std::vector<Usable> usable;
  usable.reserve(trips.size());
  for (const auto& rt : trips) {
    if (rt.route.edges.empty() || rt.route.edges.size() > 3) continue;
    double corrected = ramp_corrected_duration(rt.trip, rt.route, graph);
    if (corrected < kMinUsableDurationS) {
      ++diag.discarded_nonpositive_duration;
      continue;
    }
    usable.push_back({&rt, corrected});
  }

  std::vector<DerivedDurationSample> samples;

  // Direct samples from single-edge trips.
  for (const auto& u : usable) {
    if (u.rt->route.edges.size() != 1) continue;
    const Edge& e = graph.edge(u.rt->route.edges.front());
    DerivedDurationSample s;
    s.edge_id = e.id;
    s.slot = u.rt->trip.origin_slot;
    s.duration_s = u.corrected_s;
    s.speed_kmh = speed_kmh_from(e.length_m, u.corrected_s);
    if (s.speed_kmh > kMaxPlausibleSpeedFactor * e.speed_limit_kmh) {
      ++diag.discarded_implausible_speed;
      continue;
    }
    s.confidence = 1.0;
    s.source = SampleSource::DirectSingleEdge;
    samples.push_back(std::move(s));
    ++diag.direct_samples;
  }

  // Differenced samples: same origin slot, the longer route extends the
  // shorter by exactly one edge.
  std::unordered_map<std::string, std::vector<const Usable*>> by_slot_route;
  for (const auto& u : usable) {
    std::string key = std::to_string(u.rt->trip.origin_slot.index) + "#" +
                      route_key(u.rt->route.edges);
    by_slot_route[key].push_back(&u);
  }
  for (const auto& longer : usable) {
    const auto& edges = longer.rt->route.edges;
    if (edges.size() < 2) continue;
    std::span<const std::string> prefix(edges.data(), edges.size() - 1);
    std::string key = std::to_string(longer.rt->trip.origin_slot.index) + "#" +
                      route_key(prefix);
    auto it = by_slot_route.find(key);
    if (it == by_slot_route.end()) continue;
    const Edge& ext = graph.edge(edges.back());
    for (const Usable* shorter : it->second) {
      if (shorter->rt == longer.rt) continue;
      double diff = longer.corrected_s - shorter->corrected_s;
      if (diff <= 0) {
        ++diag.discarded_negative_difference;
        continue;
      }
      if (diff < kMinUsableDurationS) {
        ++diag.discarded_nonpositive_duration;
        continue;
      }
      DerivedDurationSample s;
      s.edge_id = ext.id;
      s.slot = longer.rt->trip.origin_slot;
      s.duration_s = diff;
      s.speed_kmh = speed_kmh_from(ext.length_m, diff);
      if (s.speed_kmh > kMaxPlausibleSpeedFactor * ext.speed_limit_kmh) {
        ++diag.discarded_implausible_speed;
        continue;
      }
      s.confidence = confidence_weight(longer.corrected_s,
                                       shorter->corrected_s, ext.length_m,
                                       lambda);
      s.source = SampleSource::Differenced;
      s.trip_longer = trip_uid(longer.rt->trip.txn);
      s.trip_shorter = trip_uid(shorter->rt->trip.txn);
      samples.push_back(std::move(s));
      ++diag.differenced_samples;
    }
  }
  return samples;
}

namespace {

double log_normal_pdf(double x, double mean, double variance) {
  double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * variance) - d * d / (2.0 * variance);
}

std::vector<double> kmeanspp_centers(std::span<const double> values,
                                     std::span<const double> weights,
                                     int k, std::mt19937_64& rng) {
  std::vector<double> centers;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double total_w = std::accumulate(weights.begin(), weights.end(), 0.0);

  // First center drawn by sample weight, the rest by weighted squared
  // distance to the nearest chosen center.
  double target = unit(rng) * total_w;
  double acc = 0.0;
  std::size_t first = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += weights[i];
    if (acc >= target) {
      first = i;
      break;
    }
  }
  centers.push_back(values[first]);
  while (static_cast<int>(centers.size()) < k) {
    std::vector<double> d2(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      double best = std::numeric_limits<double>::max();
      for (double c : centers) best = std::min(best, (values[i] - c) * (values[i] - c));
      d2[i] = weights[i] * best;
      sum += d2[i];
    }
    if (sum <= 0.0) {
      // All points sit on centers; take the first value not yet used.
      std::set<double> used(centers.begin(), centers.end());
      for (double v : values) {
        if (!used.count(v)) {
          centers.push_back(v);
          break;
        }
      }
      continue;
    }
    double t = unit(rng) * sum;
    double a = 0.0;
    std::size_t pick = values.size() - 1;
    for (std::size_t i = 0; i < values.size(); ++i) {
      a += d2[i];
      if (a >= t) {
        pick = i;
        break;
      }
    }
    centers.push_back(values[pick]);
  }
  return centers;
}

}  // namespace

std::optional<GmmFit> fit_weighted_gmm(std::span<const double> values,
                                       std::span<const double> weights,
                                       int components, std::uint64_t seed) {
  if (components < 1) throw std::invalid_argument("components must be >= 1");
  if (values.size() != weights.size())
    throw std::invalid_argument("values/weights size mismatch");
  for (double w : weights)
    if (w <= 0) throw std::invalid_argument("sample weights must be positive");

  std::set<double> distinct(values.begin(), values.end());
  if (static_cast<int>(distinct.size()) < components) return std::nullopt;

  std::mt19937_64 rng(seed);
  auto centers = kmeanspp_centers(values, weights, components, rng);

  double total_w = std::accumulate(weights.begin(), weights.end(), 0.0);
  double mean_all = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    mean_all += weights[i] * values[i];
  mean_all /= total_w;
  double var_all = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    var_all += weights[i] * (values[i] - mean_all) * (values[i] - mean_all);
  var_all = std::max(var_all / total_w, kGmmVarianceFloor);

  GmmFit fit;
  auto& comp = fit.params.components;
  comp.resize(components);
  for (int k = 0; k < components; ++k)
    comp[k] = {1.0 / components, centers[k], var_all};

  std::size_t n = values.size();
  std::vector<double> resp(n * components);
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < kGmmMaxIterations; ++iter) {
    // E step: responsibilities and weighted log-likelihood.
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < components; ++k) {
        double lp = std::log(comp[k].weight) +
                    log_normal_pdf(values[i], comp[k].mean, comp[k].variance);
        resp[i * components + k] = lp;
        mx = std::max(mx, lp);
      }
      double sum = 0.0;
      for (int k = 0; k < components; ++k)
        sum += std::exp(resp[i * components + k] - mx);
      double log_px = mx + std::log(sum);
      ll += weights[i] * log_px;
      for (int k = 0; k < components; ++k)
        resp[i * components + k] =
            std::exp(resp[i * components + k] - log_px);
    }
    fit.log_likelihood_trace.push_back(ll);
    if (ll - prev_ll < kGmmTolerance && iter > 0) break;
    prev_ll = ll;

    // M step with responsibilities scaled by the sample weights.
    for (int k = 0; k < components; ++k) {
      double nk = 0.0, mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double wr = weights[i] * resp[i * components + k];
        nk += wr;
        mu += wr * values[i];
      }
      if (nk <= 0) {
        fit.params.variance_floored = true;
        comp[k].variance = kGmmVarianceFloor;
        comp[k].weight = 1e-12;
        continue;
      }
      mu /= nk;
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double wr = weights[i] * resp[i * components + k];
        var += wr * (values[i] - mu) * (values[i] - mu);
      }
      var /= nk;
      if (var < kGmmVarianceFloor) {
        var = kGmmVarianceFloor;
        fit.params.variance_floored = true;
      }
      comp[k].weight = nk / total_w;
      comp[k].mean = mu;
      comp[k].variance = var;
    }
  }
  std::sort(comp.begin(), comp.end(),
            [](const GmmComponent& a, const GmmComponent& b) {
              return a.mean < b.mean;
            });
  return fit;
}

LetterValues weighted_letter_values(std::span<const double> values,
                                    std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size())
    throw std::invalid_argument("letter values need non-empty weighted sample");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  auto quantile = [&](double q) {
    double threshold = q * total;
    double acc = 0.0;
    for (auto idx : order) {
      acc += weights[idx];
      if (acc >= threshold) return values[idx];
    }
    return values[order.back()];
  };
  LetterValues lv;
  lv.min = values[order.front()];
  lv.lower_fourth = quantile(0.25);
  lv.median = quantile(0.5);
  lv.upper_fourth = quantile(0.75);
  lv.max = values[order.back()];
  return lv;
}

void CrowdSpeedMap::insert(EdgeSpeedDistribution dist) {
  Key key{dist.edge_id, dist.slot.index};
  cells_[key] = std::move(dist);
}

const EdgeSpeedDistribution* CrowdSpeedMap::find(const std::string& edge_id,
                                                 int slot_index) const {
  auto it = cells_.find({edge_id, slot_index});
  return it == cells_.end() ? nullptr : &it->second;
}

LetterValues CrowdSpeedMap::letter_values_or_fallback(
    const HighwayGraph& graph, const std::string& edge_id,
    int slot_index) const {
  if (const auto* cell = find(edge_id, slot_index)) return cell->letter_values;
  double limit = graph.edge(edge_id).speed_limit_kmh;
  return {limit, limit, limit, limit, limit};
}

CrowdSpeedMap estimate_slot_distributions(std::span<const RoutedTrip> trips,
                                          const HighwayGraph& graph,
                                          const CrowdSpeedConfig& config,
                                          DeriveDiagnostics* diag) {
  auto samples = derive_edge_samples(trips, graph, config.lambda, diag);
  std::map<CrowdSpeedMap::Key, std::vector<DerivedDurationSample>> grouped;
  for (auto& s : samples)
    grouped[{s.edge_id, s.slot.index}].push_back(std::move(s));

  CrowdSpeedMap out(config.slot_width_min);
  int slots = kMinutesPerDay / config.slot_width_min;
  for (const auto& edge : graph.edges()) {
    for (int slot = 0; slot < slots; ++slot) {
      EdgeSpeedDistribution cell;
      cell.edge_id = edge.id;
      cell.slot = {slot, config.slot_width_min};
      auto it = grouped.find({edge.id, slot});
      if (it != grouped.end()) cell.samples = std::move(it->second);

      // Sparsity gate on the confidence mass: the cell needs the equivalent
      // of min_samples fully-confident samples, or it is as good as
      // uncovered and falls back to free flow.
      double confidence_mass = 0.0;
      for (const auto& s : cell.samples) confidence_mass += s.confidence;
      if (cell.samples.size() >= config.min_samples &&
          confidence_mass >= static_cast<double>(config.min_samples)) {
        std::vector<double> speeds, weights;
        speeds.reserve(cell.samples.size());
        for (const auto& s : cell.samples) {
          speeds.push_back(s.speed_kmh);
          weights.push_back(s.confidence);
        }
        cell.letter_values = weighted_letter_values(speeds, weights);
        std::set<double> distinct(speeds.begin(), speeds.end());
        int k = std::min<int>(config.gmm_components,
                              static_cast<int>(distinct.size()));
        std::uint64_t cell_seed =
            fnv1a(edge.id + "@" + std::to_string(slot),
                  config.seed ^ 1469598103934665603ull);
        if (auto fit = fit_weighted_gmm(speeds, weights, k, cell_seed)) {
          for (auto& c : fit->params.components) {
            c.mean = std::clamp(c.mean, 1.0, 1.5 * edge.speed_limit_kmh);
          }
          cell.gmm = std::move(fit->params);
        }
        cell.fallback = false;
      } else {
        cell.fallback = true;
        double limit = edge.speed_limit_kmh;
        cell.letter_values = {limit, limit, limit, limit, limit};
      }
      out.insert(std::move(cell));
    }
  }
  return out;
}

void CrowdSpeedMap::save(std::ostream& out) const {
  out << "# slot_width_min=" << slot_width_ << "\n";
  out << "edge,slot,fallback,min,lf,median,uf,max";
  out << ",gmm_w1,gmm_mu1,gmm_var1,...\n";
  char buf[256];
  for (const auto& [key, cell] : cells_) {
    const auto& lv = cell.letter_values;
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.4f,%.4f,%.4f,%.4f,%.4f",
                  key.first.c_str(), key.second, cell.fallback ? 1 : 0, lv.min,
                  lv.lower_fourth, lv.median, lv.upper_fourth, lv.max);
    out << buf;
    if (cell.gmm) {
      for (const auto& c : cell.gmm->components) {
        std::snprintf(buf, sizeof(buf), ",%.8g,%.8g,%.8g", c.weight, c.mean,
                      c.variance);
        out << buf;
      }
    }
    out << "\n";
  }
}

CrowdSpeedMap CrowdSpeedMap::load(std::istream& in) {
  CrowdSpeedMap map;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# slot_width_min=", 0) == 0) {
      map.slot_width_ = std::stoi(line.substr(17));
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() < 8) throw std::invalid_argument("bad speed-map record");
    EdgeSpeedDistribution cell;
    cell.edge_id = f[0];
    cell.slot = {std::stoi(f[1]), map.slot_width_};
    cell.fallback = (f[2] == "1");
    cell.letter_values = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                          std::stod(f[6]), std::stod(f[7])};
    if (f.size() > 8) {
      GmmParams gmm;
      for (std::size_t i = 8; i + 3 <= f.size(); i += 3) {
        gmm.components.push_back(
            {std::stod(f[i]), std::stod(f[i + 1]), std::stod(f[i + 2])});
      }
      if (!gmm.components.empty()) cell.gmm = std::move(gmm);
    }
    map.insert(std::move(cell));
  }
  return map;
}

void CrowdSpeedMap::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write speed map " + path);
  save(out);
}

CrowdSpeedMap CrowdSpeedMap::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open speed map " + path);
  return load(in);
}

}  // namespace tollcast
