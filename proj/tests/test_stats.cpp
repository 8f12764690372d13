#include "tollcast/stats.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "test_util.hpp"

using namespace tollcast;

namespace {

std::vector<Trip> trips_to(const std::vector<std::string>& dests) {
  std::vector<Trip> trips;
  Timestamp t0 = make_timestamp(2016, 6, 1, 8, 0, 0);
  for (std::size_t i = 0; i < dests.size(); ++i)
    trips.push_back(
        make_trip(testutil::txn("V", "S1", dests[i], t0 + i * 3600, 600)));
  return trips;
}

}  // namespace

TEST_CASE("destination entropy") {
  CHECK(destination_entropy(trips_to({"A", "A", "A"})) == doctest::Approx(0));
  CHECK(destination_entropy(trips_to({"A", "B", "A", "B"})) ==
        doctest::Approx(1.0));
  // counts {A:2, B:1, C:1}: direct -sum p log2 p evaluation gives 1.5 bits
  double expected = -(0.5 * std::log2(0.5) + 0.25 * std::log2(0.25) +
                      0.25 * std::log2(0.25));
  CHECK(destination_entropy(trips_to({"A", "B", "A", "C"})) ==
        doctest::Approx(expected));
  CHECK(expected == doctest::Approx(1.5));
  CHECK_THROWS_AS(destination_entropy({}), std::invalid_argument);
}

TEST_CASE("entropy is permutation invariant and maximal for uniform support") {
  auto a = destination_entropy(trips_to({"A", "B", "C", "A", "B"}));
  auto b = destination_entropy(trips_to({"B", "A", "B", "C", "A"}));
  CHECK(a == doctest::Approx(b));
  // uniform over 4 destinations beats any skewed mix on the same support
  auto uniform = destination_entropy(trips_to({"A", "B", "C", "D"}));
  auto skewed = destination_entropy(trips_to({"A", "A", "A", "B", "C", "D"}));
  CHECK(uniform == doctest::Approx(2.0));
  CHECK(skewed < uniform);
}

TEST_CASE("ndcg rank similarity") {
  std::vector<RankedItem> ref{{"A", 3}, {"B", 2}, {"C", 1}};
  CHECK(ndcg_rank_similarity(ref, ref) == doctest::Approx(1.0));

  // reversed ranking, hand-evaluated DCG with the reference gains
  std::vector<RankedItem> reversed{{"C", 1}, {"B", 2}, {"A", 3}};
  double ideal = 3.0 / std::log2(2) + 2.0 / std::log2(3) + 1.0 / std::log2(4);
  double dcg = 1.0 / std::log2(2) + 2.0 / std::log2(3) + 3.0 / std::log2(4);
  CHECK(ndcg_rank_similarity(ref, reversed) == doctest::Approx(dcg / ideal));

  std::vector<RankedItem> disjoint{{"X", 9}, {"Y", 1}};
  CHECK(ndcg_rank_similarity(ref, disjoint) == doctest::Approx(0.0));

  CHECK_THROWS_AS(ndcg_rank_similarity({}, ref), std::invalid_argument);
}

TEST_CASE("ndcg self-similarity is 1 and swaps never exceed it") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RankedItem> ranking;
    int n = 2 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i)
      ranking.push_back({"D" + std::to_string(i),
                         static_cast<double>(n - i) + (rng() % 3)});
    CHECK(ndcg_rank_similarity(ranking, ranking) == doctest::Approx(1.0));
    auto swapped = ranking;
    std::size_t k = rng() % (n - 1);
    std::swap(swapped[k], swapped[k + 1]);
    CHECK(ndcg_rank_similarity(ranking, swapped) <= 1.0 + 1e-12);
  }
}

TEST_CASE("speed STD variants") {
  std::vector<double> constant{100, 100, 100};
  auto v = speed_std_variants(constant, 120);
  CHECK(v.vs_historical == doctest::Approx(0));

  std::vector<double> two{100, 120};
  auto w = speed_std_variants(two, 120);
  CHECK(w.vs_limit == doctest::Approx(std::sqrt((400.0 + 0.0) / 2)));
  CHECK(w.vs_limit == doctest::Approx(14.142135).epsilon(1e-4));

  std::vector<double> at_limit{120, 120, 120};
  CHECK(speed_std_variants(at_limit, 120).vs_limit == doctest::Approx(0));

  CHECK_THROWS_AS(speed_std_variants(std::vector<double>{100}, 120),
                  std::invalid_argument);
  CHECK_THROWS_AS(speed_std_variants(two, 0), std::invalid_argument);
}

TEST_CASE("pearson correlation") {
  std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 3);
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(pearson(x, neg) == doctest::Approx(-1.0));

  // against an independently coded textbook formula
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0, 1);
  std::vector<double> a, b;
  for (int i = 0; i < 200; ++i) {
    a.push_back(noise(rng));
    b.push_back(0.3 * a.back() + noise(rng));
  }
  double n = a.size(), sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  double reference = (n * sab - sa * sb) /
                     std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
  CHECK(pearson(a, b) == doctest::Approx(reference).epsilon(1e-12));

  std::vector<double> flat{2, 2, 2};
  std::vector<double> rising{1, 2, 3};
  CHECK_THROWS_AS(pearson(flat, rising), std::domain_error);
}

TEST_CASE("pearson is invariant under positive affine transforms") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> noise(0, 1);
  std::vector<double> a, b, a2, b2;
  for (int i = 0; i < 100; ++i) {
    a.push_back(noise(rng));
    b.push_back(noise(rng) - 0.4 * a.back());
    a2.push_back(3.5 * a.back() + 11);
    b2.push_back(0.25 * b.back() - 2);
  }
  CHECK(pearson(a, b) == doctest::Approx(pearson(a2, b2)).epsilon(1e-10));
}

TEST_CASE("edge coverage per slot") {
  auto g = testutil::chain_graph({1000, 1000, 1000, 1000});
  Timestamp t0 = make_timestamp(2016, 6, 1, 8, 0, 0);
  std::vector<RoutedTrip> trips;
  for (int i = 0; i < 3; ++i)
    trips.push_back({make_trip(testutil::txn("V", "S1", "S2", t0 + i, 60)),
                     Route{{"E1"}}});
  auto coverage = edge_coverage(trips, g, 3);
  CHECK(coverage[16] == doctest::Approx(0.25));  // 8:00 is slot 16

  std::vector<RoutedTrip> full;
  full.push_back({make_trip(testutil::txn("V", "S1", "S5", t0, 600)),
                  Route{{"E1", "E2", "E3", "E4"}}});
  auto all = edge_coverage(full, g, 1000);
  CHECK(all[16] == doctest::Approx(1.0));
}

TEST_CASE("destination distribution normalizes") {
  Timestamp t0 = make_timestamp(2016, 6, 1, 8, 0, 0);
  std::vector<Trip> trips = trips_to({"A", "B", "A"});
  auto dist = destination_distribution("S1", trips);
  double total = 0;
  for (const auto& [dest, p] : dist.probabilities) total += p;
  CHECK(total == doctest::Approx(1.0));
  CHECK(dist.probabilities["A"] == doctest::Approx(2.0 / 3));
  (void)t0;
}
