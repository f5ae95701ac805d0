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

#ifndef STARVOL_MODELS_COSTS_HPP
#define STARVOL_MODELS_COSTS_HPP

#include <cmath>
#include <string>
#include <utility>

#include <starvol/error.hpp>
#include <starvol/geometry.hpp>
#include <starvol/models/dataset.hpp>
#include <starvol/models/mlp.hpp>
#include <starvol/types.hpp>

/**
 * \file
 * \brief Behavioral cost functions on MLP parameters and their analytic gradients.
 *
 * Both costs are cross-entropies against a fixed target distribution per input: one-hot
 * labels for the expected loss, the anchor network's softmax for the expected KL. Their
 * gradient with respect to the logits is (q - target) / m, which is backpropagated.
 */

namespace starvol::models {

enum class CostKind { loss, kl };

inline std::string to_string(CostKind k) { return k == CostKind::loss ? "loss" : "kl"; }

inline CostKind cost_kind_from_string(const std::string& s) {
  if (s == "loss") {
    return CostKind::loss;
  }
  if (s == "kl") {
    return CostKind::kl;
  }
  throw Error("unknown cost kind: " + s);
}

/// Mean cross-entropy or mean KL from an anchor over a fixed input set.
///
/// Immutable after construction; operator() and gradient() are safe to call concurrently.
class BehaviorCost {
 public:
  /// Expected loss: mean cross-entropy against the dataset labels.
  static BehaviorCost loss(const MlpShape& shape, const Dataset& data) {
    if (!data.has_labels()) {
      throw Error("loss cost requires a labelled dataset");
    }
    data.validate(static_cast<int>(shape.output_dim()));
    BehaviorCost c(CostKind::loss, shape, data.inputs);
    c.targets_ = RowMatrix::Zero(data.size(), shape.output_dim());
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      c.targets_(i, (*data.labels)[static_cast<std::size_t>(i)]) = 1.0;
    }
    return c;
  }

  /// Expected KL(f(x; anchor) || f(x; theta)) over the inputs.
  static BehaviorCost kl(const MlpParams& anchor, const RowMatrix& inputs) {
    BehaviorCost c(CostKind::kl, anchor.shape, inputs);
    c.target_log_ = log_softmax(forward_logits(anchor, inputs));
    c.targets_ = c.target_log_.array().exp().matrix();
    return c;
  }

  [[nodiscard]] CostKind kind() const { return kind_; }
  [[nodiscard]] const MlpShape& shape() const { return shape_; }
  [[nodiscard]] Eigen::Index dim() const { return shape_.param_count(); }
  [[nodiscard]] const RowMatrix& inputs() const { return inputs_; }

  [[nodiscard]] double operator()(const Vector& flat) const { return value(flat); }

  [[nodiscard]] double value(const Vector& flat) const {
    const RowMatrix logq = log_softmax(forward_all(shape_, flat, inputs_).back());
    return value_from_log_probs(logq);
  }

  /// Value and analytic gradient with respect to the flat parameters.
  [[nodiscard]] std::pair<double, Vector> value_and_gradient(const Vector& flat) const {
    const auto acts = forward_all(shape_, flat, inputs_);
    const RowMatrix logq = log_softmax(acts.back());
    const double v = value_from_log_probs(logq);
    const double m = static_cast<double>(inputs_.rows());
    RowMatrix delta = (logq.array().exp().matrix() - targets_) / m;
    Vector g(flat.size());
    for (std::size_t li = shape_.layers().size(); li-- > 0;) {
      const auto& l = shape_.layers()[li];
      const Eigen::Index off = shape_.offset(li);
      Eigen::Map<RowMatrix> gw(g.data() + off, l.out, l.in);
      Eigen::Map<Vector> gb(g.data() + off + l.out * l.in, l.out);
      gw.noalias() = delta.transpose() * acts[li];
      gb = delta.colwise().sum().transpose();
      if (li == 0) {
        break;
      }
      const Eigen::Map<const RowMatrix> w(flat.data() + off, l.out, l.in);
      RowMatrix back = delta * w;
      if (shape_.layers()[li - 1].activation == Activation::tanh) {
        back.array() *= 1.0 - acts[li].array().square();
      }
      delta = std::move(back);
    }
    return {v, std::move(g)};
  }

  [[nodiscard]] Vector gradient(const Vector& flat) const { return value_and_gradient(flat).second; }

  /// Adapts the cost to the geometry module's cost-function handle.
  [[nodiscard]] CostFn as_cost_fn() const {
    return [self = *this](const Vector& flat) { return self.value(flat); };
  }

 private:
  BehaviorCost(CostKind kind, MlpShape shape, RowMatrix inputs)
      : kind_(kind), shape_(std::move(shape)), inputs_(std::move(inputs)) {
    if (inputs_.cols() != shape_.input_dim()) {
      throw Error("input width does not match the network");
    }
    if (inputs_.rows() == 0) {
      throw Error("cost needs at least one input");
    }
  }

  [[nodiscard]] double value_from_log_probs(const RowMatrix& logq) const {
    double acc = 0.0;
    if (kind_ == CostKind::loss) {
      acc = -(targets_.array() * logq.array()).sum();
    } else {
      for (Eigen::Index i = 0; i < logq.rows(); ++i) {
        for (Eigen::Index c = 0; c < logq.cols(); ++c) {
          const double p = targets_(i, c);
          if (p > 0.0) {
            acc += p * (target_log_(i, c) - logq(i, c));
          }
        }
      }
    }
    return acc / static_cast<double>(logq.rows());
  }

  CostKind kind_;
  MlpShape shape_;
  RowMatrix inputs_;
  RowMatrix targets_;
  RowMatrix target_log_;
};

/// Mean cross-entropy (nats) of the network on a labelled dataset.
inline double loss_cost(const MlpParams& params, const Dataset& data) {
  return BehaviorCost::loss(params.shape, data)(params.flat);
}

/// Mean KL divergence of `params`' predictive distribution from `anchor`'s.
inline double kl_cost(const MlpParams& anchor, const MlpParams& params, const RowMatrix& inputs) {
  if (!(anchor.shape == params.shape)) {
    throw Error("anchor and parameters have different shapes");
  }
  return BehaviorCost::kl(anchor, inputs)(params.flat);
}

}  // namespace starvol::models

#endif  // STARVOL_MODELS_COSTS_HPP
