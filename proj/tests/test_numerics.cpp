// Copyright 2026 The starvol Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <starvol/numerics.hpp>

#include "oracles.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("log_sum_exp examples") {
  const std::vector<double> two_zeros = {0.0, 0.0};
  CHECK_THAT(starvol::log_sum_exp(two_zeros), WithinAbs(std::log(2.0), 1e-15));

  const std::vector<double> dominated = {-1e9, 0.0};
  CHECK(starvol::log_sum_exp(dominated) == 0.0);

  const std::vector<double> small = {std::log(1.0), std::log(2.0), std::log(3.0)};
  CHECK_THAT(starvol::log_sum_exp(small), WithinAbs(std::log(1.0 + 2.0 + 3.0), 1e-15));
}

TEST_CASE("log_sum_exp handles zeros and rejects empty input") {
  const std::vector<double> with_zero = {starvol::kNegInf, 1.5};
  CHECK(starvol::log_sum_exp(with_zero) == 1.5);
  const std::vector<double> all_zero = {starvol::kNegInf, starvol::kNegInf};
  CHECK(starvol::log_sum_exp(all_zero) == starvol::kNegInf);
  CHECK_THROWS_WITH(starvol::log_sum_exp(std::vector<double>{}), "empty aggregation");
}

TEST_CASE("log_sum_exp stays within the smooth-max bracket") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(-1e6, 1e6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng() % 50;
    std::vector<double> terms(k);
    for (auto& t : terms) {
      t = scale(rng);
    }
    const double hi = *std::max_element(terms.begin(), terms.end());
    const double lse = starvol::log_sum_exp(terms);
    CHECK(lse >= hi);
    CHECK(lse <= hi + std::log(static_cast<double>(k)) + 1e-9);
  }
}

TEST_CASE("LogScalar arithmetic") {
  const auto a = starvol::LogScalar(700.0);
  const auto b = starvol::LogScalar(700.0);
  CHECK_THAT((a + b).log_value(), WithinAbs(700.0 + std::log(2.0), 1e-12));
  CHECK((a * b).log_value() == 1400.0);
  CHECK((a + starvol::LogScalar::zero()).log_value() == 700.0);
  CHECK((starvol::LogScalar::zero() + starvol::LogScalar::zero()) == starvol::LogScalar::zero());
  CHECK_THAT(starvol::LogScalar::from_linear(1000.0).log10_value(), WithinAbs(3.0, 1e-14));
  CHECK_THROWS_AS(starvol::LogScalar::from_linear(-1.0), starvol::Error);
}

TEST_CASE("log_gamma matches 50-digit arithmetic") {
  for (double x : {0.5, 1.0, 1.5, 2.0, 3.7, 9.99, 14.5, 15.0, 100.25, 2405.0, 1e5 + 0.5, 5e6, 1e7}) {
    const double expected = oracle::log_gamma(x);
    INFO("x = " << x);
    CHECK_THAT(starvol::log_gamma(x), WithinAbs(expected, 1e-12 * std::max(1.0, std::abs(expected))));
  }
  CHECK_THROWS_AS(starvol::log_gamma(0.0), starvol::Error);
}

TEST_CASE("log_sphere_area examples") {
  CHECK_THAT(starvol::log_sphere_area(2), WithinAbs(std::log(2.0 * std::numbers::pi), 1e-14));
  CHECK_THAT(starvol::log_sphere_area(3), WithinAbs(std::log(4.0 * std::numbers::pi), 1e-14));
  CHECK_THAT(starvol::log_sphere_area(1), WithinAbs(std::log(2.0), 1e-14));
  const double expected = oracle::log_sphere_area(4810);
  CHECK_THAT(starvol::log_sphere_area(4810), WithinAbs(expected, 1e-10 * std::abs(expected)));
  CHECK_THROWS_AS(starvol::log_sphere_area(0), starvol::Error);
}

TEST_CASE("log_sphere_area satisfies the two-step recurrence") {
  // |S^n| = 2 pi / (n - 1) |S^{n-2}|, i.e. area(n + 1) = 2 pi / (n - 1) area(n - 1).
  for (long long n = 2; n < 20000; n += 37) {
    const double lhs = starvol::log_sphere_area(n + 1);
    const double rhs = std::log(2.0 * std::numbers::pi / static_cast<double>(n - 1)) +
                       starvol::log_sphere_area(n - 1);
    INFO("n = " << n);
    CHECK_THAT(lhs, WithinAbs(rhs, 1e-12 * std::max(1.0, std::abs(lhs))));
  }
}

TEST_CASE("log_erf_diff examples") {
  CHECK_THAT(starvol::log_erf_diff(-40.0, 40.0), WithinAbs(std::log(2.0), 1e-15));
  CHECK_THAT(starvol::log_erf_diff(0.0, 1.0), WithinAbs(oracle::log_erf_diff(0.0, 1.0), 1e-14));
  // Naive subtraction of erf values gives log(0) here.
  CHECK(std::log(std::erf(11.0) - std::erf(10.0)) == starvol::kNegInf);
  CHECK_THAT(starvol::log_erf_diff(10.0, 11.0), WithinRel(oracle::log_erf_diff(10.0, 11.0), 1e-13));
  CHECK_THROWS_WITH(starvol::log_erf_diff(1.0, 1.0), "empty integration interval");
  CHECK_THROWS_AS(starvol::log_erf_diff(2.0, 1.0), starvol::Error);
}

TEST_CASE("log_erf_diff agrees with 50-digit arithmetic across regimes") {
  const std::vector<std::pair<double, double>> cases = {
      {-3.0, -2.0}, {-30.0, -29.5}, {-0.1, 0.2}, {0.1, 0.3}, {0.4, 0.45}, {1.0, 6.0},  {5.9, 6.1},
      {20.0, 20.5}, {25.9, 26.1},   {30.0, 31.0}, {100.0, 100.01}, {-5.0, 50.0}, {3.0, 1e300}};
  for (const auto& [a, b] : cases) {
    const double expected = oracle::log_erf_diff(a, b);
    INFO("a = " << a << ", b = " << b);
    CHECK_THAT(starvol::log_erf_diff(a, b), WithinAbs(expected, 1e-11 * std::max(1.0, std::abs(expected))));
  }
}

TEST_CASE("log_erf_diff is monotone in both endpoints") {
  double prev = starvol::kNegInf;
  for (double b = -4.5; b < 40.0; b += 0.37) {
    const double v = starvol::log_erf_diff(-5.0, b);
    CHECK(v >= prev);
    prev = v;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double a = -6.0; a < 29.0; a += 0.41) {
    const double v = starvol::log_erf_diff(a, 30.0);
    CHECK(v <= prev);
    prev = v;
  }
}
