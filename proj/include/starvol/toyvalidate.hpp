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

#ifndef STARVOL_TOYVALIDATE_HPP
#define STARVOL_TOYVALIDATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <starvol/error.hpp>
#include <starvol/geometry.hpp>
#include <starvol/numerics.hpp>
#include <starvol/precondition.hpp>
#include <starvol/types.hpp>

/**
 * \file
 * \brief Closed-form ellipsoid oracles and the statistical identities they satisfy.
 *
 * An ellipsoid {x : x^T A x <= 1} with principal radii R has A = Q diag(1/R^2) Q^T.
 * As a neighborhood it is the cost x^T A x / 2 with cutoff 1/2.
 */

namespace starvol {

struct Ellipsoid {
  Vector radii;
  /// Orthogonal matrix whose columns are the principal axes; identity when absent.
  std::optional<Matrix> rotation;

  static Ellipsoid sphere(Eigen::Index n, double radius = 1.0) { return {Vector::Constant(n, radius), {}}; }

  static Ellipsoid from_eigenvalues(const Vector& eigenvalues) {
    return {eigenvalues.array().rsqrt().matrix(), {}};
  }

  /// Radii evenly spaced in log over [lo, hi].
  static Ellipsoid log_spaced(Eigen::Index n, double lo, double hi) {
    Vector r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
      r[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    }
    return {r, {}};
  }

  [[nodiscard]] Eigen::Index dim() const { return radii.size(); }

  /// Eigenvalues of A, i.e. 1/R^2.
  [[nodiscard]] Vector eigenvalues() const { return radii.array().square().inverse().matrix(); }

  [[nodiscard]] Matrix quadratic_form() const {
    const Vector lambda = eigenvalues();
    if (!rotation) {
      return lambda.asDiagonal();
    }
    return *rotation * lambda.asDiagonal() * rotation->transpose();
  }

  /// x^T A x for a point expressed in the ambient basis.
  [[nodiscard]] double form(const Vector& x) const {
    if (!rotation) {
      return x.cwiseQuotient(radii).squaredNorm();
    }
    return (rotation->transpose() * x).cwiseQuotient(radii).squaredNorm();
  }

  void validate() const {
    if ((radii.array() <= 0.0).any()) {
      throw Error("ellipsoid radii must be positive");
    }
    if (rotation) {
      const Eigen::Index n = dim();
      if (rotation->rows() != n || rotation->cols() != n ||
          ((*rotation) * rotation->transpose() - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-9) {
        throw Error("ellipsoid rotation must be orthogonal");
      }
    }
  }
};

/// Haar-random orthogonal matrix (QR of a Gaussian matrix with sign fix).
inline Matrix random_rotation(Eigen::Index n, Rng& rng) {
  Matrix g(n, n);
  std::normal_distribution<double> normal;
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) {
      g(r, c) = normal(rng);
    }
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix rr = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (rr(i, i) < 0.0) {
      q.col(i) *= -1.0;
    }
  }
  return q;
}

/// Neighborhood of the origin whose star domain is exactly the ellipsoid.
inline NeighborhoodSpec ellipsoid_neighborhood(const Ellipsoid& e) {
  e.validate();
  NeighborhoodSpec spec;
  spec.anchor = Vector::Zero(e.dim());
  spec.cost = [e](const Vector& x) { return 0.5 * e.form(x); };
  spec.cutoff = 0.5;
  spec.measure = MeasureSpec::lebesgue();
  return spec;
}

/// The preconditioner that makes the radial estimator exact: P proportional to A^{-1/2}.
inline Preconditioner ellipsoid_preconditioner(const Ellipsoid& e) {
  if (!e.rotation) {
    return Preconditioner::diagonal(e.radii).normalized().set_label("exact");
  }
  Vector log_r = e.radii.array().log().matrix();
  log_r.array() -= log_r.mean();
  return Preconditioner::dense_from_spectrum(*e.rotation, log_r).set_label("exact");
}

/// r(u) = (u^T A u)^{-1/2}.
inline double ellipsoid_radius(const Ellipsoid& e, const Vector& u) { return 1.0 / std::sqrt(e.form(u)); }

/// (n/2) log pi - log Gamma(n/2 + 1) + sum log R_i.
inline double ellipsoid_log_volume_exact(const Ellipsoid& e) {
  const double n = static_cast<double>(e.dim());
  return 0.5 * n * std::log(std::numbers::pi) - log_gamma(0.5 * n + 1.0) + e.radii.array().log().sum();
}

/// Population variance of a vector's entries.
inline double population_variance(const Vector& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().mean();
}

inline Vector uniform_sphere(Eigen::Index n, Rng& rng) {
  Vector u = standard_normal(n, rng);
  return u / u.norm();
}

struct VarianceCheck {
  double empirical = 0.0;
  double predicted = 0.0;
};

/// Empirical Var(u^T A u) over k sphere draws against (2/(n+2)) Var(lambda).
inline VarianceCheck quadratic_form_variance_check(const Ellipsoid& e, long k, std::uint64_t seed) {
  const Eigen::Index n = e.dim();
  Rng rng{splitmix64(seed)};
  // Welford accumulation.
  double mean = 0.0;
  double m2 = 0.0;
  for (long i = 0; i < k; ++i) {
    const double x = e.form(uniform_sphere(n, rng));
    const double delta = x - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (x - mean);
  }
  VarianceCheck out;
  out.empirical = k > 1 ? m2 / static_cast<double>(k - 1) : 0.0;
  out.predicted = 2.0 / static_cast<double>(n + 2) * population_variance(e.eigenvalues());
  return out;
}

/// Taylor-regime prediction n^2 / (2(n+2)) Var(lambda) / E[lambda]^2 for Var[n log r(u)]:
/// (n/2)^2 Var(u^T A u) / E[lambda]^2 with the quadratic-form variance above.
inline double log_estimator_variance_prediction(const Ellipsoid& e) {
  const Vector lambda = e.eigenvalues();
  const double n = static_cast<double>(e.dim());
  const double mean = lambda.mean();
  return n * n / (2.0 * (n + 2.0)) * population_variance(lambda) / (mean * mean);
}

/// Draws k uniform directions and returns log r(u) for each.
inline std::vector<double> sampled_log_radii(const Ellipsoid& e, long k, std::uint64_t seed) {
  Rng rng{splitmix64(seed ^ 0x5bd1e995ULL)};
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(k));
  for (long i = 0; i < k; ++i) {
    out.push_back(std::log(ellipsoid_radius(e, uniform_sphere(e.dim(), rng))));
  }
  return out;
}

inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) {
    return 0.0;
  }
  double mean = 0.0;
  for (double x : xs) {
    mean += x;
  }
  mean /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) {
    acc += (x - mean) * (x - mean);
  }
  return acc / static_cast<double>(xs.size() - 1);
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) {
    throw Error("median of an empty set");
  }
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  if (xs.size() % 2 == 1) {
    return *mid;
  }
  const double upper = *mid;
  const double lower = *std::max_element(xs.begin(), mid);
  return 0.5 * (lower + upper);
}

/// Predicted modal log-radius: (1/2) log(n / sum R_i^{-2}), the log of the
/// root harmonic mean of R_i^2.
inline double harmonic_mean_prediction(const Ellipsoid& e) {
  const double n = static_cast<double>(e.dim());
  return 0.5 * std::log(n / e.radii.array().square().inverse().sum());
}

/// Mean log radius (1/n) sum log R_i, the log of the geometric mean.
inline double geometric_mean_log_radius(const Ellipsoid& e) { return e.radii.array().log().mean(); }

struct JensenGap {
  /// true_log_volume - mean(estimates).
  double mean_log_gap = 0.0;
  /// Standard error of the mean of the estimates.
  double stderr_of_mean = 0.0;
  /// sigma^2/2 from the sample variance of the estimates: the gap a lognormal would show.
  double lognormal_sigma_sq_half = 0.0;
};

inline JensenGap jensen_gap_report(std::span<const double> estimates, double true_log_volume) {
  if (estimates.size() < 2) {
    throw Error("jensen gap needs at least two runs");
  }
  double mean = 0.0;
  for (double x : estimates) {
    mean += x;
  }
  mean /= static_cast<double>(estimates.size());
  const double var = sample_variance(estimates);
  JensenGap out;
  out.mean_log_gap = true_log_volume - mean;
  out.stderr_of_mean = std::sqrt(var / static_cast<double>(estimates.size()));
  out.lognormal_sigma_sq_half = 0.5 * var;
  return out;
}

/// Covariance diagonal exp(-2 h_i t) after gradient flow on (1/2) theta^T H theta from N(0, I).
inline Vector gd_flow_covariance(const Vector& h_diag, double t) {
  if (t < 0.0) {
    throw Error("gradient-flow time must be non-negative");
  }
  return (-2.0 * t * h_diag.array()).exp().matrix();
}

/// Ensemble check: flows `samples` standard normal inits to time t, returns per-coordinate
/// sample variances.
inline Vector gd_flow_ensemble_variance(const Vector& h_diag, double t, long samples, std::uint64_t seed) {
  if (t < 0.0) {
    throw Error("gradient-flow time must be non-negative");
  }
  const Eigen::Index n = h_diag.size();
  const Vector decay = (-t * h_diag.array()).exp().matrix();
  Rng rng{splitmix64(seed ^ 0x9e3779b9ULL)};
  Vector mean = Vector::Zero(n);
  Vector m2 = Vector::Zero(n);
  for (long i = 0; i < samples; ++i) {
    const Vector theta = standard_normal(n, rng).cwiseProduct(decay);
    const Vector delta = theta - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta.cwiseProduct(theta - mean);
  }
  return m2 / static_cast<double>(samples - 1);
}

/// Coefficients of theta_i^2 in the negative log-density after flow (up to a factor 1/2):
/// exp(2 h_i t).
inline Vector gd_flow_density_coefficients(const Vector& h_diag, double t) {
  return (2.0 * t * h_diag.array()).exp().matrix();
}

/// Largest relative deviation of the density coefficients from being proportional to the
/// loss coefficients h_i / 2. Zero iff the log-density is a multiple of the loss.
inline double gd_flow_nonproportionality(const Vector& h_diag, double t) {
  const Vector density = gd_flow_density_coefficients(h_diag, t);
  const Vector ratio = density.cwiseQuotient(0.5 * h_diag);
  return ratio.maxCoeff() / ratio.minCoeff() - 1.0;
}

}  // namespace starvol

#endif  // STARVOL_TOYVALIDATE_HPP
