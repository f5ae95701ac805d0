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

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <starvol/geometry.hpp>
#include <starvol/toyvalidate.hpp>

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using starvol::Ellipsoid;
using starvol::Preconditioner;
using starvol::Vector;

namespace {

// Var over theta of a cos^2 + b sin^2 by the midpoint rule on [0, 2 pi).
double angular_variance_2d(double a, double b) {
  constexpr int kSteps = 200000;
  double s1 = 0.0;
  double s2 = 0.0;
  for (int i = 0; i < kSteps; ++i) {
    const double t = 2.0 * std::numbers::pi * (i + 0.5) / kSteps;
    const double f = a * std::cos(t) * std::cos(t) + b * std::sin(t) * std::sin(t);
    s1 += f;
    s2 += f * f;
  }
  s1 /= kSteps;
  s2 /= kSteps;
  return s2 - s1 * s1;
}

Ellipsoid log_uniform_random(Eigen::Index n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(std::log(lo), std::log(hi));
  Vector radii(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    radii[i] = std::exp(unif(rng));
  }
  return {radii, {}};
}

}  // namespace

TEST_CASE("ellipsoid_radius examples") {
  starvol::Rng rng(4);
  const auto sphere = Ellipsoid::sphere(6);
  for (int i = 0; i < 10; ++i) {
    CHECK_THAT(starvol::ellipsoid_radius(sphere, starvol::uniform_sphere(6, rng)), WithinAbs(1.0, 1e-14));
  }
  CHECK_THAT(starvol::ellipsoid_radius(Ellipsoid{Vector{{2.0, 1.0}}, {}}, Vector::Unit(2, 0)), WithinAbs(2.0, 1e-15));
}

TEST_CASE("ellipsoid_radius agrees with find_radius, with and without rotation") {
  starvol::Rng rng(9);
  const Ellipsoid plain{Vector{{1.0, 2.0, 4.0}}, {}};
  const Ellipsoid rotated{Vector{{1.0, 2.0, 4.0}}, starvol::random_rotation(3, rng)};
  starvol::RadiusOptions opts;
  for (const auto* e : {&plain, &rotated}) {
    const auto spec = starvol::ellipsoid_neighborhood(*e);
    for (int i = 0; i < 50; ++i) {
      const Vector u = starvol::uniform_sphere(3, rng);
      const double exact = starvol::ellipsoid_radius(*e, u);
      const double found = starvol::find_radius(spec, u, opts).radius;
      CHECK(found <= exact);
      CHECK(found >= exact * (1.0 - opts.rel_tol));
    }
  }
  Ellipsoid bad{Vector{{1.0, 2.0}}, starvol::Matrix{{1.0, 0.1}, {0.0, 1.0}}};
  CHECK_THROWS_AS(bad.validate(), starvol::Error);
  CHECK_THROWS_AS((Ellipsoid{Vector{{1.0, 0.0}}, {}}).validate(), starvol::Error);
}

TEST_CASE("ellipsoid_log_volume_exact examples") {
  CHECK_THAT(starvol::ellipsoid_log_volume_exact(Ellipsoid::sphere(2)), WithinAbs(std::log(std::numbers::pi), 1e-14));
  CHECK_THAT(starvol::ellipsoid_log_volume_exact(Ellipsoid::sphere(3)),
             WithinAbs(std::log(4.0 * std::numbers::pi / 3.0), 1e-14));

  const auto e = Ellipsoid::log_spaced(50, 1e-2, 1e2);
  starvol::EstimateOptions opts;
  opts.radius.rel_tol = 1e-12;
  const auto est =
      starvol::estimate_local_volume(starvol::ellipsoid_neighborhood(e), starvol::ellipsoid_preconditioner(e), 10, opts);
  CHECK_THAT(est.log_volume, WithinAbs(starvol::ellipsoid_log_volume_exact(e), 1e-6));

  // Rotation does not change the volume, and the exact preconditioner still gives zero variance.
  starvol::Rng rng(31);
  const Ellipsoid rotated{e.radii, starvol::random_rotation(50, rng)};
  const auto rot =
      starvol::estimate_local_volume(starvol::ellipsoid_neighborhood(rotated), starvol::ellipsoid_preconditioner(rotated),
                                     10, opts);
  for (const auto& s : rot.samples) {
    CHECK_THAT(s.log_term, WithinAbs(starvol::ellipsoid_log_volume_exact(e), 1e-6));
  }
}

TEST_CASE("quadratic_form_variance_check examples") {
  const auto sphere = starvol::quadratic_form_variance_check(Ellipsoid::sphere(20, 0.7), 10000, 1);
  CHECK(sphere.predicted == 0.0);
  CHECK(sphere.empirical < 1e-12);

  Vector lambda = Vector::Ones(128);
  lambda[0] = 9.0;
  const auto outlier = starvol::quadratic_form_variance_check(Ellipsoid::from_eigenvalues(lambda), 200000, 2);
  CHECK_THAT(outlier.empirical, WithinRel(outlier.predicted, 0.10));

  const double a = 5.0;
  const double b = 0.5;
  const auto two = starvol::quadratic_form_variance_check(Ellipsoid::from_eigenvalues(Vector{{a, b}}), 200000, 3);
  CHECK_THAT(two.predicted, WithinRel((a - b) * (a - b) / 8.0, 1e-12));
  CHECK_THAT(two.predicted, WithinRel(angular_variance_2d(a, b), 1e-9));
  CHECK_THAT(two.empirical, WithinRel(two.predicted, 0.03));
}

TEST_CASE("log_estimator_variance_prediction examples") {
  CHECK(starvol::log_estimator_variance_prediction(Ellipsoid::sphere(10, 3.0)) < 1e-25);
  const auto radii = starvol::sampled_log_radii(Ellipsoid::sphere(10, 3.0), 100, 4);
  CHECK(starvol::sample_variance(radii) < 1e-24);

  Vector lambda(256);
  for (Eigen::Index i = 0; i < 256; ++i) {
    lambda[i] = i % 2 == 0 ? 1.05 : 0.95;
  }
  const auto e = Ellipsoid::from_eigenvalues(lambda);
  auto log_r = starvol::sampled_log_radii(e, 100000, 5);
  for (auto& x : log_r) {
    x *= 256.0;
  }
  CHECK_THAT(starvol::sample_variance(log_r), WithinRel(starvol::log_estimator_variance_prediction(e), 0.15));
}

TEST_CASE("harmonic_mean_prediction examples") {
  CHECK_THAT(starvol::harmonic_mean_prediction(Ellipsoid::sphere(9, 2.5)), WithinAbs(std::log(2.5), 1e-14));

  const auto e = log_uniform_random(2000, 1e-2, 1e2, 6);
  const double predicted = starvol::harmonic_mean_prediction(e);
  const double median = starvol::median(starvol::sampled_log_radii(e, 2000, 7));
  CHECK(std::abs(median - predicted) < 0.02 * std::abs(predicted));
  const double shortfall = 2000.0 * (starvol::geometric_mean_log_radius(e) - predicted);
  CHECK(shortfall > 0.0);
}

TEST_CASE("harmonic prediction never exceeds the geometric mean") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto e = log_uniform_random(2 + static_cast<Eigen::Index>(rng() % 300), 1e-3, 1e3, rng());
    CHECK(starvol::harmonic_mean_prediction(e) <= starvol::geometric_mean_log_radius(e) + 1e-12);
  }
  const auto s = Ellipsoid::sphere(40, 0.3);
  CHECK_THAT(starvol::harmonic_mean_prediction(s), WithinAbs(starvol::geometric_mean_log_radius(s), 1e-14));
}

TEST_CASE("median") {
  CHECK(starvol::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(starvol::median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS(starvol::median({}), starvol::Error);
}

TEST_CASE("jensen_gap_report examples") {
  const std::vector<double> flat(40, -12.5);
  const auto zero = starvol::jensen_gap_report(flat, -12.5);
  CHECK_THAT(zero.mean_log_gap, WithinAbs(0.0, 1e-6));
  CHECK(zero.lognormal_sigma_sq_half == 0.0);

  // k = 1 runs whose single term is exactly lognormal: the log estimate is N(mu, sigma^2)
  // and the true log volume is mu + sigma^2 / 2.
  constexpr double kSigma = 3.0;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal(-7.0, kSigma);
  std::vector<double> runs(10000);
  for (auto& x : runs) {
    x = normal(rng);
  }
  const auto gap = starvol::jensen_gap_report(runs, -7.0 + 0.5 * kSigma * kSigma);
  CHECK_THAT(gap.mean_log_gap, WithinRel(4.5, 0.10));
  CHECK_THAT(gap.lognormal_sigma_sq_half, WithinRel(4.5, 0.10));
  CHECK(gap.mean_log_gap >= -3.0 * gap.stderr_of_mean);

  CHECK_THROWS_AS(starvol::jensen_gap_report(std::vector<double>{1.0}, 0.0), starvol::Error);
}

TEST_CASE("naive runs on a wide ellipsoid show a large Jensen gap") {
  const auto e = Ellipsoid::log_spaced(1000, 1e-2, 1e2);
  const auto spec = starvol::ellipsoid_neighborhood(e);
  const auto p = Preconditioner::identity(1000);
  std::vector<double> runs;
  for (int i = 0; i < 30; ++i) {
    starvol::EstimateOptions opts;
    opts.seed = 500 + static_cast<std::uint64_t>(i);
    runs.push_back(starvol::estimate_local_volume(spec, p, 4, opts).log_volume);
  }
  const auto gap = starvol::jensen_gap_report(runs, starvol::ellipsoid_log_volume_exact(e));
  CHECK(gap.mean_log_gap > 100.0);
}

TEST_CASE("gradient-flow covariance examples") {
  const Vector h{{0.3, 1.0, 7.0}};
  CHECK(starvol::gd_flow_covariance(h, 0.0) == Vector::Ones(3));
  CHECK_THAT(starvol::gd_flow_covariance(Vector{{1.0}}, 1.0)[0], WithinAbs(std::exp(-2.0), 1e-15));
  CHECK_THROWS_AS(starvol::gd_flow_covariance(h, -0.1), starvol::Error);

  const Vector var = starvol::gd_flow_ensemble_variance(h, 0.4, 100000, 11);
  const Vector predicted = starvol::gd_flow_covariance(h, 0.4);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK_THAT(var[i], WithinRel(predicted[i], 0.02));
  }
}

TEST_CASE("gradient-flow density is not proportional to the loss") {
  const Vector density = starvol::gd_flow_density_coefficients(Vector{{2.0, 1.0}}, 0.5);
  CHECK_THAT(density[0] / density[1], WithinRel(std::exp(1.0), 1e-14));
  CHECK(std::abs(density[0] / density[1] - 2.0) > 0.5);
  CHECK(starvol::gd_flow_nonproportionality(Vector{{2.0, 1.0}}, 0.5) > 0.3);
  CHECK_THAT(starvol::gd_flow_nonproportionality(Vector::Constant(4, 1.7), 2.0), WithinAbs(0.0, 1e-14));
}

TEST_CASE("naive estimator rarely overshoots by a factor of ten") {
  const auto e = Ellipsoid::log_spaced(10, 0.2, 5.0);
  const auto spec = starvol::ellipsoid_neighborhood(e);
  const double exact = starvol::ellipsoid_log_volume_exact(e);
  int over = 0;
  for (int i = 0; i < 200; ++i) {
    starvol::EstimateOptions opts;
    opts.seed = 7000 + static_cast<std::uint64_t>(i);
    const auto est = starvol::estimate_local_volume(spec, Preconditioner::identity(10), 5, opts);
    if (est.log_volume > exact + std::log(10.0)) {
      ++over;
    }
  }
  // Markov: at most 10% in expectation; 200 runs give roughly 7 percentage points of slack.
  CHECK(over <= 34);
}
