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

#ifndef STARVOL_MODELS_MLP_HPP
#define STARVOL_MODELS_MLP_HPP

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <starvol/error.hpp>
#include <starvol/geometry.hpp>
#include <starvol/types.hpp>

namespace starvol::models {

enum class Activation { tanh, linear };

inline std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "linear"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") {
    return Activation::tanh;
  }
  if (s == "linear") {
    return Activation::linear;
  }
  throw Error("unknown activation: " + s);
}

struct Layer {
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  Activation activation = Activation::tanh;

  [[nodiscard]] Eigen::Index param_count() const { return in * out + out; }
  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Layer sizes; hidden layers use tanh, the last layer is linear into a softmax.
class MlpShape {
 public:
  MlpShape() = default;
  explicit MlpShape(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

  /// input -> hidden... -> classes, tanh on every hidden layer.
  static MlpShape make(Eigen::Index input, const std::vector<Eigen::Index>& hidden, Eigen::Index classes) {
    std::vector<Layer> layers;
    Eigen::Index prev = input;
    for (Eigen::Index h : hidden) {
      layers.push_back({prev, h, Activation::tanh});
      prev = h;
    }
    layers.push_back({prev, classes, Activation::linear});
    return MlpShape(std::move(layers));
  }

  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
  [[nodiscard]] Eigen::Index input_dim() const { return layers_.front().in; }
  [[nodiscard]] Eigen::Index output_dim() const { return layers_.back().out; }

  [[nodiscard]] Eigen::Index param_count() const {
    Eigen::Index total = 0;
    for (const auto& l : layers_) {
      total += l.param_count();
    }
    return total;
  }

  /// Offset of layer i's weight block in the flat vector; its bias follows the weights.
  [[nodiscard]] Eigen::Index offset(std::size_t i) const {
    Eigen::Index off = 0;
    for (std::size_t j = 0; j < i; ++j) {
      off += layers_[j].param_count();
    }
    return off;
  }

  friend bool operator==(const MlpShape&, const MlpShape&) = default;

 private:
  void validate() const {
    if (layers_.empty()) {
      throw Error("MLP needs at least one layer");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].in <= 0 || layers_[i].out <= 0) {
        throw Error("layer sizes must be positive");
      }
      if (i > 0 && layers_[i].in != layers_[i - 1].out) {
        throw Error("consecutive layer sizes do not chain");
      }
    }
  }

  std::vector<Layer> layers_;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Flat parameter vector plus the shape that gives it meaning.
///
/// Layer i occupies [offset(i), offset(i) + out*in) for its row-major (out x in) weight
/// matrix, followed by `out` biases.
struct MlpParams {
  MlpShape shape;
  Vector flat;

  MlpParams() = default;
  MlpParams(MlpShape s, Vector f) : shape(std::move(s)), flat(std::move(f)) {
    if (flat.size() != shape.param_count()) {
      throw Error("flat parameter vector does not match the shape");
    }
  }

  [[nodiscard]] Eigen::Map<const RowMatrix> weights(const Vector& v, std::size_t i) const {
    const auto& l = shape.layers()[i];
    return {v.data() + shape.offset(i), l.out, l.in};
  }
  [[nodiscard]] Eigen::Map<const Vector> bias(const Vector& v, std::size_t i) const {
    const auto& l = shape.layers()[i];
    return {v.data() + shape.offset(i) + l.out * l.in, l.out};
  }
};

/// Per-layer standard deviation used by init_params. The default is 1/sqrt(fan_in).
using SigmaRule = std::function<double(const Layer&)>;

inline double fan_in_sigma(const Layer& l) { return 1.0 / std::sqrt(static_cast<double>(l.in)); }

/// Per-parameter sigma vector laid out like the flat parameters.
inline Vector sigma_vector(const MlpShape& shape, const SigmaRule& rule = fan_in_sigma) {
  Vector sigma(shape.param_count());
  for (std::size_t i = 0; i < shape.layers().size(); ++i) {
    const auto& l = shape.layers()[i];
    sigma.segment(shape.offset(i), l.param_count()).setConstant(rule(l));
  }
  return sigma;
}

/// Samples parameters from the zero-mean Gaussian the volume measure is defined by.
inline std::pair<MlpParams, MeasureSpec> init_params(const MlpShape& shape, Rng& rng,
                                                     const SigmaRule& rule = fan_in_sigma) {
  Vector sigma = sigma_vector(shape, rule);
  Vector flat = standard_normal(shape.param_count(), rng).cwiseProduct(sigma);
  return {MlpParams(shape, std::move(flat)), MeasureSpec::gaussian(std::move(sigma))};
}

/// Activations of every layer for a batch (rows are examples). acts[0] is the input.
inline std::vector<RowMatrix> forward_all(const MlpShape& shape, const Vector& flat, const RowMatrix& x) {
  if (x.cols() != shape.input_dim()) {
    throw Error("input width does not match the network");
  }
  if (flat.size() != shape.param_count()) {
    throw Error("parameter vector does not match the network");
  }
  std::vector<RowMatrix> acts;
  acts.reserve(shape.layers().size() + 1);
  acts.push_back(x);
  for (std::size_t i = 0; i < shape.layers().size(); ++i) {
    const auto& l = shape.layers()[i];
    const Eigen::Map<const RowMatrix> w(flat.data() + shape.offset(i), l.out, l.in);
    const Eigen::Map<const Vector> b(flat.data() + shape.offset(i) + l.out * l.in, l.out);
    RowMatrix z = acts.back() * w.transpose();
    z.rowwise() += b.transpose();
    if (l.activation == Activation::tanh) {
      z = z.array().tanh().matrix();
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

/// Logits for a batch of inputs.
inline RowMatrix forward_logits(const MlpParams& params, const RowMatrix& x) {
  return forward_all(params.shape, params.flat, x).back();
}

/// Logits for a single input.
inline Vector forward_logits(const MlpParams& params, const Vector& x) {
  RowMatrix row = x.transpose();
  return forward_logits(params, row).row(0).transpose();
}

/// Row-wise log-softmax.
inline RowMatrix log_softmax(const RowMatrix& logits) {
  RowMatrix out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double hi = out.row(r).maxCoeff();
    const double lse = hi + std::log((out.row(r).array() - hi).exp().sum());
    out.row(r).array() -= lse;
  }
  return out;
}

}  // namespace starvol::models

#endif  // STARVOL_MODELS_MLP_HPP
