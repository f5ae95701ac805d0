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

#ifndef STARVOL_GEOMETRY_HPP
#define STARVOL_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <starvol/error.hpp>
#include <starvol/numerics.hpp>
#include <starvol/precondition.hpp>
#include <starvol/types.hpp>

/**
 * \file
 * \brief Radial Monte Carlo estimators for the measure of a star domain.
 *
 * A neighborhood is the largest star domain around an anchor on which the cost stays
 * below a cutoff. Along a direction u its extent is the radius r(u), found by
 * bracketing and bisection. The Lebesgue volume is |S^{n-1}|/n E[r^n]; the Gaussian
 * measure replaces r^n/n by the radial integral of the density times r^{n-1}. With a
 * preconditioner P, directions are drawn as Pu/|Pu| and each term is divided by |Pu|^n.
 */

namespace starvol {

using CostFn = std::function<double(const Vector&)>;

/// The measure whose mass is being estimated.
struct MeasureSpec {
  enum class Kind { lebesgue, gaussian };

  Kind kind = Kind::lebesgue;
  /// Per-coordinate standard deviations of a zero-mean diagonal Gaussian.
  Vector sigma;

  static MeasureSpec lebesgue() { return {}; }
  static MeasureSpec gaussian(Vector sigma) { return {Kind::gaussian, std::move(sigma)}; }

  [[nodiscard]] bool is_gaussian() const { return kind == Kind::gaussian; }
  [[nodiscard]] std::string name() const { return is_gaussian() ? "gaussian" : "lebesgue"; }

  void validate(Eigen::Index n) const {
    if (!is_gaussian()) {
      return;
    }
    if (sigma.size() != n) {
      throw Error("measure sigma has the wrong length");
    }
    if ((sigma.array() <= 0.0).any() || !sigma.allFinite()) {
      throw Error("measure sigma entries must be positive");
    }
  }
};

/// Anchor, cost, cutoff and measure: the star domain {anchor + r u : C < cutoff}.
struct NeighborhoodSpec {
  Vector anchor;
  CostFn cost;
  double cutoff = 1e-2;
  MeasureSpec measure;

  [[nodiscard]] Eigen::Index dim() const { return anchor.size(); }

  /// Checks the invariants and returns the cost at the anchor.
  double validate() const {
    if (!(cutoff > 0.0)) {
      throw Error("cutoff must be positive");
    }
    if (!cost) {
      throw Error("neighborhood has no cost function");
    }
    measure.validate(dim());
    const double c0 = cost(anchor);
    if (!std::isfinite(c0)) {
      throw CostEvaluationError();
    }
    if (!(c0 < cutoff)) {
      throw Error("anchor is not inside its neighborhood (cost " + std::to_string(c0) + " >= cutoff)");
    }
    return c0;
  }
};

struct RadiusOptions {
  double r_init = 1.0;
  double r_max = 1e6;
  double rel_tol = 1e-4;
  int max_iters = 200;
};

struct RadiusResult {
  double radius = 0.0;
  bool truncated = false;
  /// Cost at the returned radius; always below the cutoff.
  double boundary_cost = 0.0;
  int evaluations = 0;
};

/// Distance from the anchor to the cutoff surface along `direction`.
///
/// Doubles from r_init until the cost reaches the cutoff (or r_max is hit), then
/// bisects until the bracket is narrower than rel_tol times its upper end. Returns the
/// lower end of the bracket. This finds a crossing, not necessarily the first one.
inline RadiusResult find_radius(const NeighborhoodSpec& spec, const Vector& direction, const RadiusOptions& opts) {
  if (!(opts.r_init > 0.0) || !(opts.r_max >= opts.r_init)) {
    throw Error("radius search needs 0 < r_init <= r_max");
  }
  RadiusResult result;
  const auto eval = [&](double r) {
    ++result.evaluations;
    const double c = spec.cost(spec.anchor + r * direction);
    if (!std::isfinite(c)) {
      throw CostEvaluationError();
    }
    return c;
  };

  double lo = 0.0;
  double lo_cost = 0.0;
  double hi = opts.r_init;
  double hi_cost = eval(hi);
  while (hi_cost < spec.cutoff) {
    lo = hi;
    lo_cost = hi_cost;
    if (hi >= opts.r_max) {
      result.radius = opts.r_max;
      result.truncated = true;
      result.boundary_cost = hi_cost;
      return result;
    }
    if (result.evaluations >= opts.max_iters) {
      throw RadiusSearchError("radius search did not bracket the cutoff", lo, hi);
    }
    hi = std::min(2.0 * hi, opts.r_max);
    hi_cost = eval(hi);
  }
  if (lo == 0.0) {
    lo_cost = std::numeric_limits<double>::quiet_NaN();
  }
  while (hi - lo > opts.rel_tol * hi) {
    if (result.evaluations >= opts.max_iters) {
      throw RadiusSearchError("radius search did not converge", lo, hi);
    }
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    const double c = eval(mid);
    if (c < spec.cutoff) {
      lo = mid;
      lo_cost = c;
    } else {
      hi = mid;
    }
  }
  if (!(lo > 0.0)) {
    throw RadiusSearchError("radius collapsed to zero", lo, hi);
  }
  result.radius = lo;
  result.boundary_cost = lo_cost;
  return result;
}

struct Direction {
  Vector unit;
  /// log |P u|, the pre-normalization length.
  double log_norm = 0.0;
};

/// Draws u uniformly on the sphere and returns (Pu/|Pu|, log|Pu|).
inline Direction sample_direction(const Preconditioner& precond, Rng& rng) {
  Vector u = standard_normal(precond.dim(), rng);
  const double u_norm = u.norm();
  if (!(u_norm > 0.0)) {
    throw Error("degenerate isotropic draw");
  }
  u /= u_norm;
  if (precond.kind() == PreconditionerKind::identity) {
    return {std::move(u), 0.0};
  }
  Vector v = precond.apply(u);
  const double v_norm = v.norm();
  if (!(v_norm > 0.0) || !std::isfinite(v_norm)) {
    throw Error("preconditioner mapped a unit vector to zero");
  }
  return {v / v_norm, std::log(v_norm)};
}

struct RadialSample {
  Vector direction;
  double log_importance_norm = 0.0;
  double radius = 0.0;
  bool truncated = false;
  /// The radius search failed; log_term is -inf.
  bool failed = false;
  double boundary_cost = 0.0;
  double log_term = kNegInf;
};

/// One summand of the preconditioned Lebesgue estimator (before the 1/k average).
inline double lebesgue_log_term(double radius, double log_importance_norm, long long n) {
  if (!(radius > 0.0)) {
    throw Error("radius must be positive");
  }
  const double dn = static_cast<double>(n);
  return log_sphere_area(n) - std::log(dn) + dn * std::log(radius) - dn * log_importance_norm;
}

inline double lebesgue_log_term(const RadialSample& sample, long long n) {
  return lebesgue_log_term(sample.radius, sample.log_importance_norm, n);
}

/// How the radial Gaussian integral is evaluated.
enum class RadialIntegral {
  /// Second-order expansion of the exponent, integrated with error functions.
  second_order,
  /// Second-order result times a quadrature-measured ratio of the exact integrand to
  /// the expanded one. Matches the second-order value at large n and stays accurate
  /// at small n and for radii far below the peak.
  corrected,
};

namespace detail {

// 16-point Gauss-Legendre nodes and weights on [-1, 1] (positive half).
inline constexpr std::array<double, 8> kGaussLegendreNodes = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
inline constexpr std::array<double, 8> kGaussLegendreWeights = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

// log of the composite Gauss-Legendre integral of exp(f) over [a, b], shifted by `ref`.
template <class F>
double log_quadrature(F&& f, double a, double b, double ref, int panels) {
  double acc = 0.0;
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    const double half = 0.5 * width;
    for (std::size_t i = 0; i < kGaussLegendreNodes.size(); ++i) {
      const double dx = half * kGaussLegendreNodes[i];
      acc += kGaussLegendreWeights[i] * (std::exp(f(mid - dx) - ref) + std::exp(f(mid + dx) - ref));
    }
  }
  return std::log(acc * 0.5 * width) + ref;
}

}  // namespace detail

/// log of the integral over [0, radius] of rho(anchor + r direction) r^{n-1} dr, where
/// rho is the N(0, diag(sigma^2)) density.
///
/// The exponent is h(r) = const - (a r^2 + 2 b r)/2 + (n-1) log r with
/// a = sum v_i^2/sigma_i^2 and b = sum anchor_i v_i/sigma_i^2. It is expanded to
/// second order about r0 = min(r*, radius), where r* is the stationary point, and the
/// resulting Gaussian integral is evaluated with log_erf_diff.
inline double gaussian_radial_log_integral(const Vector& anchor, const Vector& direction, double radius,
                                           const Vector& sigma, RadialIntegral mode = RadialIntegral::corrected) {
  const Eigen::Index n = anchor.size();
  if (direction.size() != n || sigma.size() != n) {
    throw Error("dimension mismatch in radial integral");
  }
  if (!(radius > 0.0)) {
    throw Error("radius must be positive");
  }
  const Vector inv_var = sigma.array().square().inverse().matrix();
  const double a = direction.cwiseProduct(direction).dot(inv_var);
  if (!(a > 0.0)) {
    throw Error("zero direction in radial integral");
  }
  const double b = anchor.cwiseProduct(direction).dot(inv_var);
  const double c0 = anchor.cwiseProduct(anchor).dot(inv_var);
  const double log_norm = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) -
                          sigma.array().log().sum();
  const double m = static_cast<double>(n - 1);

  const auto h = [&](double r) {
    const double quad = log_norm - 0.5 * (c0 + a * r * r + 2.0 * b * r);
    return n == 1 ? quad : quad + m * std::log(r);
  };

  if (n == 1) {
    // Exactly quadratic: complete the square, no expansion error.
    const double centre = -b / a;
    const double s = std::sqrt(0.5 * a);
    const double peak = log_norm - 0.5 * (c0 - b * b / a);
    const double hi = std::isinf(radius) ? std::numeric_limits<double>::infinity() : s * (radius - centre);
    return peak + 0.5 * std::log(2.0 * std::numbers::pi / a) - std::numbers::ln2 + log_erf_diff(-s * centre, hi);
  }

  const double disc = std::sqrt(std::max(b * b + 4.0 * a * m, 0.0));
  // Positive root, written to avoid cancellation when b > 0.
  const double r_star = b > 0.0 ? 2.0 * m / (b + disc) : (-b + disc) / (2.0 * a);
  const double r0 = std::min(r_star, radius);
  const double slope = r0 < r_star ? -a * r0 - b + m / r0 : 0.0;
  const double curv = a + m / (r0 * r0);
  const double centre = r0 + slope / curv;
  const double peak = h(r0) + 0.5 * slope * slope / curv;
  const double s = std::sqrt(0.5 * curv);
  const double upper = std::isinf(radius) ? std::numeric_limits<double>::infinity() : s * (radius - centre);
  const double second_order =
      peak + 0.5 * std::log(2.0 * std::numbers::pi / curv) - std::numbers::ln2 + log_erf_diff(-s * centre, upper);
  if (mode == RadialIntegral::second_order) {
    return second_order;
  }

  // Window holding all but e^-45 of both integrands: h'' <= -a everywhere, so
  // h(r) <= h(r0) + slope (r - r0) - a (r - r0)^2 / 2, and likewise for the expansion.
  constexpr double kDecay = 45.0;
  double lo = 0.0;
  double hi = 0.0;
  if (r0 < r_star) {
    const double d = (-slope + std::sqrt(slope * slope + 2.0 * a * kDecay)) / a;
    lo = std::max(0.0, r0 - d);
    hi = r0;
  } else {
    const double d = std::sqrt(2.0 * kDecay / a);
    lo = std::max(0.0, r0 - d);
    hi = std::min(radius, r0 + d);
  }
  const auto q = [&](double r) { return peak - curv * 0.5 * (r - centre) * (r - centre); };
  constexpr int kPanels = 24;
  const double ref = h(r0);
  const double log_exact = detail::log_quadrature(h, lo, hi, ref, kPanels);
  const double log_expanded = detail::log_quadrature(q, lo, hi, ref, kPanels);
  return second_order + (log_exact - log_expanded);
}

/// One summand of the Gaussian-measure estimator: log|S^{n-1}| + integral - n log|v|.
inline double gaussian_log_term(double log_importance_norm, double integral, long long n) {
  return log_sphere_area(n) + integral - static_cast<double>(n) * log_importance_norm;
}

inline double gaussian_log_term(const RadialSample& sample, double integral, long long n) {
  return gaussian_log_term(sample.log_importance_norm, integral, n);
}

struct EstimateOptions {
  RadiusOptions radius;
  /// Overrides the measure-dependent default cap (1e6 Lebesgue, 20 sqrt(n) max sigma Gaussian).
  std::optional<double> r_max;
  RadialIntegral integral = RadialIntegral::corrected;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Keep each sample's direction vector in the result.
  bool keep_directions = false;
};

struct VolumeEstimate {
  double log_volume = kNegInf;
  std::vector<RadialSample> samples;
  int k = 0;
  Eigen::Index n = 0;
  std::string preconditioner_id;
  MeasureSpec measure;
  double cutoff = 0.0;

  [[nodiscard]] double log10_volume() const { return log_volume / std::numbers::ln10; }

  [[nodiscard]] std::vector<double> log_terms() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
      out.push_back(s.log_term);
    }
    return out;
  }

  [[nodiscard]] double max_term() const {
    double best = kNegInf;
    for (const auto& s : samples) {
      best = std::max(best, s.log_term);
    }
    return best;
  }

  [[nodiscard]] int failed_count() const {
    return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.failed; }));
  }

  [[nodiscard]] int truncated_count() const {
    return static_cast<int>(
        std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.truncated; }));
  }

  /// True when a Lebesgue estimate used capped radii, so it only bounds the volume from below.
  [[nodiscard]] bool lower_bound_only() const { return !measure.is_gaussian() && truncated_count() > 0; }
};

/// Default radius cap for a measure in dimension n.
inline double default_r_max(const MeasureSpec& measure, Eigen::Index n) {
  if (!measure.is_gaussian()) {
    return 1e6;
  }
  return 20.0 * std::sqrt(static_cast<double>(n)) * measure.sigma.maxCoeff();
}

/// Draws one direction, finds its radius and scores it. Failed searches score -inf.
inline RadialSample draw_radial_sample(const NeighborhoodSpec& spec, const Preconditioner& precond,
                                       const RadiusOptions& radius_opts, RadialIntegral integral, Rng& rng) {
  const auto n = static_cast<long long>(spec.dim());
  Direction dir = sample_direction(precond, rng);
  RadialSample sample;
  sample.log_importance_norm = dir.log_norm;
  try {
    const RadiusResult found = find_radius(spec, dir.unit, radius_opts);
    sample.radius = found.radius;
    sample.truncated = found.truncated;
    sample.boundary_cost = found.boundary_cost;
  } catch (const RadiusSearchError&) {
    sample.failed = true;
  } catch (const CostEvaluationError&) {
    sample.failed = true;
  }
  if (!sample.failed) {
    if (spec.measure.is_gaussian()) {
      const double log_mass =
          gaussian_radial_log_integral(spec.anchor, dir.unit, sample.radius, spec.measure.sigma, integral);
      sample.log_term = gaussian_log_term(sample, log_mass, n);
    } else {
      sample.log_term = lebesgue_log_term(sample, n);
    }
  }
  sample.direction = std::move(dir.unit);
  return sample;
}

/// log of the mean of exp(terms): LSE(terms) - log k.
inline double aggregate_log_terms(std::span<const double> terms) {
  return log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
}

/// Importance-sampled radial Monte Carlo estimate of the neighborhood's measure.
///
/// Sample i uses the generator sample_stream(opts.seed, i), so the result is identical
/// for any thread count. The cost function must be safe to call concurrently when
/// opts.threads > 1.
inline VolumeEstimate estimate_local_volume(const NeighborhoodSpec& spec, const Preconditioner& precond, int k,
                                            const EstimateOptions& opts = {}) {
  if (k < 1) {
    throw Error("sample count must be at least 1");
  }
  spec.validate();
  if (precond.dim() != spec.dim()) {
    throw Error("preconditioner dimension does not match the anchor");
  }
  RadiusOptions radius_opts = opts.radius;
  radius_opts.r_max = opts.r_max.value_or(default_r_max(spec.measure, spec.dim()));
  radius_opts.r_init = std::min(radius_opts.r_init, radius_opts.r_max);

  VolumeEstimate est;
  est.k = k;
  est.n = spec.dim();
  est.preconditioner_id = precond.label();
  est.measure = spec.measure;
  est.cutoff = spec.cutoff;
  est.samples.resize(static_cast<std::size_t>(k));

  const auto run = [&](int i) {
    Rng rng = sample_stream(opts.seed, static_cast<std::uint64_t>(i));
    est.samples[static_cast<std::size_t>(i)] = draw_radial_sample(spec, precond, radius_opts, opts.integral, rng);
    if (!opts.keep_directions) {
      est.samples[static_cast<std::size_t>(i)].direction = Vector();
    }
  };

  const int threads = std::clamp(opts.threads, 1, k);
  if (threads == 1) {
    for (int i = 0; i < k; ++i) {
      run(i);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int i = next++; i < k; i = next++) {
            run(i);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) {
      th.join();
    }
    for (const auto& e : errors) {
      if (e) {
        std::rethrow_exception(e);
      }
    }
  }

  if (est.failed_count() == k) {
    throw Error("no valid samples");
  }
  const auto terms = est.log_terms();
  est.log_volume = aggregate_log_terms(terms);
  return est;
}

}  // namespace starvol

#endif  // STARVOL_GEOMETRY_HPP
