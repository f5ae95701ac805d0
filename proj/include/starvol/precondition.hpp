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

#ifndef STARVOL_PRECONDITION_HPP
#define STARVOL_PRECONDITION_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include <starvol/error.hpp>
#include <starvol/types.hpp>

/**
 * \file
 * \brief Unit-determinant positive-definite maps used to importance-sample directions.
 *
 * A direction sampler draws u uniformly on the sphere and uses v = P u. Because
 * det P = 1 the change of coordinates preserves volume, and the only correction the
 * estimator needs is the |v|^{-n} weight.
 */

namespace starvol {

enum class PreconditionerKind { identity, diagonal, dense };

class Preconditioner {
 public:
  /// Identity map on R^n.
  static Preconditioner identity(Eigen::Index n) {
    Preconditioner p;
    p.kind_ = PreconditionerKind::identity;
    p.dim_ = n;
    p.label_ = "none";
    return p;
  }

  /// Diagonal map; entries must be positive. Not normalized.
  static Preconditioner diagonal(Vector scale) {
    if ((scale.array() <= 0.0).any() || !scale.allFinite()) {
      throw Error("diagonal preconditioner entries must be positive and finite");
    }
    Preconditioner p;
    p.kind_ = PreconditionerKind::diagonal;
    p.dim_ = scale.size();
    p.log_det_ = scale.array().log().sum();
    p.scale_ = std::move(scale);
    p.label_ = "diagonal";
    return p;
  }

  /// Dense symmetric positive-definite map. Not normalized.
  static Preconditioner dense(Matrix matrix) {
    if (matrix.rows() != matrix.cols()) {
      throw Error("dense preconditioner must be square");
    }
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, matrix.cwiseAbs().maxCoeff())) {
      throw Error("dense preconditioner must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(matrix, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
      throw Error("eigendecomposition failed");
    }
    if ((solver.eigenvalues().array() <= 0.0).any()) {
      throw Error("dense preconditioner must be positive-definite");
    }
    Preconditioner p;
    p.kind_ = PreconditionerKind::dense;
    p.dim_ = matrix.rows();
    p.log_det_ = solver.eigenvalues().array().log().sum();
    p.matrix_ = std::move(matrix);
    p.label_ = "dense";
    return p;
  }

  /// Dense map whose eigenvalues are already known; skips the eigen-solve.
  static Preconditioner dense_from_spectrum(const Matrix& eigenvectors, const Vector& log_eigenvalues) {
    if (eigenvectors.rows() != eigenvectors.cols() || eigenvectors.cols() != log_eigenvalues.size()) {
      throw Error("spectrum does not match eigenvector matrix");
    }
    Matrix m = eigenvectors * log_eigenvalues.array().exp().matrix().asDiagonal() * eigenvectors.transpose();
    Preconditioner p;
    p.kind_ = PreconditionerKind::dense;
    p.dim_ = m.rows();
    p.log_det_ = log_eigenvalues.sum();
    p.matrix_ = 0.5 * (m + m.transpose());
    p.label_ = "dense";
    return p;
  }

  [[nodiscard]] PreconditionerKind kind() const { return kind_; }
  [[nodiscard]] Eigen::Index dim() const { return dim_; }
  [[nodiscard]] double log_det() const { return log_det_; }
  [[nodiscard]] const Vector& scale() const { return scale_; }
  [[nodiscard]] const Matrix& matrix() const { return matrix_; }

  /// Short descriptor recorded alongside estimates ("none", "diag-hessian", ...).
  [[nodiscard]] const std::string& label() const { return label_; }
  Preconditioner& set_label(std::string label) {
    label_ = std::move(label);
    return *this;
  }

  /// Returns P u.
  [[nodiscard]] Vector apply(const Vector& u) const {
    if (u.size() != dim_) {
      throw Error("preconditioner dimension mismatch");
    }
    switch (kind_) {
      case PreconditionerKind::identity:
        return u;
      case PreconditionerKind::diagonal:
        return scale_.cwiseProduct(u);
      case PreconditionerKind::dense:
        return matrix_ * u;
    }
    return u;
  }

  /// Returns a copy scaled by exp(-log_det / n), so that its determinant is one.
  [[nodiscard]] Preconditioner normalized() const {
    Preconditioner p = *this;
    if (kind_ == PreconditionerKind::identity || dim_ == 0) {
      return p;
    }
    const double log_factor = -log_det_ / static_cast<double>(dim_);
    if (kind_ == PreconditionerKind::diagonal) {
      // Rescale in log space so entries spanning many decades stay exact.
      p.scale_ = (scale_.array().log() + log_factor).exp().matrix();
      p.log_det_ = p.scale_.array().log().sum();
    } else {
      p.matrix_ = matrix_ * std::exp(log_factor);
      p.log_det_ = log_det_ + static_cast<double>(dim_) * log_factor;
    }
    return p;
  }

 private:
  PreconditionerKind kind_ = PreconditionerKind::identity;
  Eigen::Index dim_ = 0;
  double log_det_ = 0.0;
  Vector scale_;
  Matrix matrix_;
  std::string label_;
};

inline Preconditioner normalize_unit_det(const Preconditioner& p) { return p.normalized(); }

inline Vector apply(const Preconditioner& p, const Vector& u) { return p.apply(u); }

/// P proportional to V (|D|^{1/2} + eps)^{-1} V^T for the eigendecomposition H = V D V^T.
inline Preconditioner from_hessian(const Matrix& hessian, double eps) {
  if (hessian.rows() != hessian.cols()) {
    throw Error("Hessian must be square");
  }
  if (!(eps >= 0.0)) {
    throw Error("eps must be non-negative");
  }
  const double asym = (hessian - hessian.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * std::max(1.0, hessian.cwiseAbs().maxCoeff())) {
    throw Error("Hessian is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (hessian + hessian.transpose()));
  if (solver.info() != Eigen::Success) {
    throw Error("eigendecomposition failed");
  }
  const Eigen::Index n = hessian.rows();
  Vector log_eig(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double denom = std::sqrt(std::abs(solver.eigenvalues()[i])) + eps;
    if (!(denom > 0.0)) {
      throw Error("preconditioner eigenvalue is not positive; use eps > 0 for singular Hessians");
    }
    log_eig[i] = -std::log(denom);
  }
  log_eig.array() -= log_eig.mean();
  return Preconditioner::dense_from_spectrum(solver.eigenvectors(), log_eig).set_label("hessian");
}

/// Diagonal P with entries 1 / (|d_i|^exponent + eps), normalized to unit determinant.
///
/// Accepts an exact Hessian diagonal, an Adam second-moment buffer, or |first moment|.
inline Preconditioner from_diagonal(const Vector& source, double eps, double exponent = 0.5) {
  Vector scale(source.size());
  for (Eigen::Index i = 0; i < source.size(); ++i) {
    scale[i] = 1.0 / (std::pow(std::abs(source[i]), exponent) + eps);
  }
  return Preconditioner::diagonal(std::move(scale)).normalized();
}

/// Sidecar serialization: {"format", "version", "kind", "dim", "label", payload}.
inline nlohmann::json to_json(const Preconditioner& p) {
  nlohmann::json j;
  j["format"] = "starvol-preconditioner";
  j["version"] = 1;
  j["dim"] = p.dim();
  j["label"] = p.label();
  switch (p.kind()) {
    case PreconditionerKind::identity:
      j["kind"] = "identity";
      break;
    case PreconditionerKind::diagonal:
      j["kind"] = "diagonal";
      j["scale"] = std::vector<double>(p.scale().begin(), p.scale().end());
      break;
    case PreconditionerKind::dense: {
      j["kind"] = "dense";
      std::vector<double> flat;
      flat.reserve(static_cast<std::size_t>(p.dim() * p.dim()));
      for (Eigen::Index r = 0; r < p.dim(); ++r) {
        for (Eigen::Index c = 0; c < p.dim(); ++c) {
          flat.push_back(p.matrix()(r, c));
        }
      }
      j["matrix"] = std::move(flat);
      break;
    }
  }
  return j;
}

inline Preconditioner preconditioner_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "starvol-preconditioner" || j.value("version", 0) != 1) {
    throw Error("not a starvol preconditioner file");
  }
  const auto dim = j.at("dim").get<Eigen::Index>();
  const auto kind = j.at("kind").get<std::string>();
  const auto label = j.value("label", kind);
  if (kind == "identity") {
    return Preconditioner::identity(dim).set_label(label);
  }
  if (kind == "diagonal") {
    const auto values = j.at("scale").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != dim) {
      throw Error("preconditioner payload does not match dim");
    }
    return Preconditioner::diagonal(Eigen::Map<const Vector>(values.data(), dim)).set_label(label);
  }
  if (kind == "dense") {
    const auto values = j.at("matrix").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != dim * dim) {
      throw Error("preconditioner payload does not match dim");
    }
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Matrix m = Eigen::Map<const RowMajor>(values.data(), dim, dim);
    return Preconditioner::dense(std::move(m)).set_label(label);
  }
  throw Error("unknown preconditioner kind: " + kind);
}

inline void save_preconditioner(const Preconditioner& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << to_json(p).dump() << '\n';
}

inline Preconditioner load_preconditioner(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot read " + path.string());
  }
  return preconditioner_from_json(nlohmann::json::parse(in));
}

}  // namespace starvol

#endif  // STARVOL_PRECONDITION_HPP
