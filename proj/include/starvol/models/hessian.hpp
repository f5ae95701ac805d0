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

#ifndef STARVOL_MODELS_HESSIAN_HPP
#define STARVOL_MODELS_HESSIAN_HPP

#include <starvol/error.hpp>
#include <starvol/types.hpp>

namespace starvol::models {

inline constexpr double kHessianStep = 1e-3;

/// Central differences of an analytic gradient, column j = (g(x + h e_j) - g(x - h e_j)) / 2h.
/// Not symmetrized.
template <class GradFn>
Matrix hessian_columns(GradFn&& grad, const Vector& x, double h = kHessianStep) {
  const Eigen::Index n = x.size();
  Matrix out(n, n);
  Vector probe = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    probe[j] = x[j] + h;
    const Vector plus = grad(probe);
    probe[j] = x[j] - h;
    const Vector minus = grad(probe);
    probe[j] = x[j];
    out.col(j) = (plus - minus) / (2.0 * h);
  }
  return out;
}

/// Symmetrized finite-difference Hessian (H + H^T) / 2.
template <class GradFn>
Matrix hessian_full(GradFn&& grad, const Vector& x, double h = kHessianStep) {
  const Matrix raw = hessian_columns(grad, x, h);
  return 0.5 * (raw + raw.transpose());
}

/// Per-coordinate second differences (C(x + h e_i) - 2 C(x) + C(x - h e_i)) / h^2.
template <class CostFnT>
Vector hessian_diag(CostFnT&& cost, const Vector& x, double h = kHessianStep) {
  const Eigen::Index n = x.size();
  const double centre = cost(x);
  Vector out(n);
  Vector probe = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    probe[i] = x[i] + h;
    const double plus = cost(probe);
    probe[i] = x[i] - h;
    const double minus = cost(probe);
    probe[i] = x[i];
    out[i] = (plus - 2.0 * centre + minus) / (h * h);
  }
  return out;
}

}  // namespace starvol::models

#endif  // STARVOL_MODELS_HESSIAN_HPP
