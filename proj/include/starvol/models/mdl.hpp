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

#ifndef STARVOL_MODELS_MDL_HPP
#define STARVOL_MODELS_MDL_HPP

#include <cmath>
#include <numbers>

#include <starvol/error.hpp>
#include <starvol/geometry.hpp>
#include <starvol/models/costs.hpp>
#include <starvol/models/dataset.hpp>
#include <starvol/models/mlp.hpp>

namespace starvol::models {

/// Bits-back description length of a neighborhood used as a uniform ensemble, in nats.
struct DescriptionLength {
  /// KL(Unif(A) || N(0, Sigma)) with the Mahalanobis term evaluated at the anchor.
  double kl_term = 0.0;
  /// -sum log p(y | x) under the anchor network.
  double data_term = 0.0;

  [[nodiscard]] double total() const { return kl_term + data_term; }
};

/// kl_term from a Lebesgue log-volume: (n/2) log 2pi + (1/2) sum log sigma^2
/// + (1/2) theta^T Sigma^{-1} theta - log vol(A).
inline double mdl_kl_term(double log_volume, const Vector& anchor, const Vector& sigma) {
  if (anchor.size() != sigma.size()) {
    throw Error("anchor and sigma lengths differ");
  }
  const double n = static_cast<double>(anchor.size());
  const double mahalanobis = anchor.cwiseQuotient(sigma).squaredNorm();
  return 0.5 * n * std::log(2.0 * std::numbers::pi) + sigma.array().log().sum() + 0.5 * mahalanobis - log_volume;
}

inline DescriptionLength description_length(const VolumeEstimate& volume, const MlpParams& anchor,
                                             const MeasureSpec& prior, const Dataset& data) {
  if (volume.measure.is_gaussian()) {
    throw Error("description length requires Lebesgue volume");
  }
  if (!prior.is_gaussian()) {
    throw Error("description length needs the Gaussian initialization measure as prior");
  }
  prior.validate(anchor.flat.size());
  if (volume.n != anchor.flat.size()) {
    throw Error("volume estimate dimension does not match the anchor");
  }
  DescriptionLength out;
  out.kl_term = mdl_kl_term(volume.log_volume, anchor.flat, prior.sigma);
  out.data_term = loss_cost(anchor, data) * static_cast<double>(data.size());
  return out;
}

}  // namespace starvol::models

#endif  // STARVOL_MODELS_MDL_HPP
