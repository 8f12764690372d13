#include "tollcast/ks_test.hpp"

#include <random>

#include "doctest.h"

using namespace tollcast;

TEST_CASE("ks test accepts normal samples at the nominal rate") {
  int accepted = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(90.0, 8.0);
    std::vector<double> samples;
    for (int i = 0; i < 500; ++i) samples.push_back(dist(rng));
    if (ks_normality_test(samples, 0.05).accepted) ++accepted;
  }
  CHECK(accepted >= 90);
  CHECK(accepted <= 99);
}

TEST_CASE("ks test rejects uniform samples") {
  int rejected = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    std::uniform_real_distribution<double> dist(60.0, 120.0);
    std::vector<double> samples;
    for (int i = 0; i < 500; ++i) samples.push_back(dist(rng));
    if (!ks_normality_test(samples, 0.05).accepted) ++rejected;
  }
  CHECK(rejected >= 90);
}

TEST_CASE("small groups auto-accept with the insufficient flag") {
  std::vector<double> seven{1, 2, 3, 100, 200, 5, 9};
  auto report = ks_normality_test(seven, 0.05);
  CHECK(report.accepted);
  CHECK(report.insufficient);
  CHECK(report.sample_count == 7);
}

TEST_CASE("degenerate zero-variance samples are rejected") {
  std::vector<double> flat(20, 42.0);
  auto report = ks_normality_test(flat, 0.05);
  CHECK(!report.accepted);
  CHECK(report.p_value == doctest::Approx(0.0));
}

TEST_CASE("p-values live in [0,1] and track the statistic") {
  CHECK(lilliefors_p_value(0.01, 500) > 0.5);
  CHECK(lilliefors_p_value(0.2, 500) < 1e-6);
  for (double d : {0.005, 0.02, 0.05, 0.1, 0.3}) {
    double p = lilliefors_p_value(d, 200);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("normal cdf sanity") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-4));
  CHECK(normal_cdf(-6.0) < 1e-8);
}
