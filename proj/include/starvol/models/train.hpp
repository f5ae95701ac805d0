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

#ifndef STARVOL_MODELS_TRAIN_HPP
#define STARVOL_MODELS_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <starvol/error.hpp>
#include <starvol/models/costs.hpp>
#include <starvol/models/dataset.hpp>
#include <starvol/models/mlp.hpp>
#include <starvol/types.hpp>

namespace starvol::models {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moment buffers. `nu` is the raw (not bias-corrected) second-moment buffer.
struct AdamState {
  Vector mu;
  Vector nu;
  long step = 0;
  AdamHyper hyper;

  static AdamState zeros(Eigen::Index n, AdamHyper hyper = {}) {
    return {Vector::Zero(n), Vector::Zero(n), 0, hyper};
  }
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, Vector& params, const Vector& grad) {
  if (grad.size() != params.size() || state.mu.size() != params.size()) {
    throw Error("Adam buffers do not match the parameters");
  }
  const auto& h = state.hyper;
  ++state.step;
  state.mu = h.beta1 * state.mu + (1.0 - h.beta1) * grad;
  state.nu = h.beta2 * state.nu + (1.0 - h.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  params.array() -= h.lr * (state.mu.array() / c1) / ((state.nu.array() / c2).sqrt() + h.eps);
}

struct PoisonConfig {
  Dataset data;
  double alpha = 1.0;
};

struct TrainConfig {
  int epochs = 50;
  Eigen::Index batch = 32;
  std::uint64_t seed = 0;
  AdamHyper adam;
  /// Save a checkpoint every this many steps (plus step 0 and the final step).
  long checkpoint_every = 100;
  /// When set, the objective is L_clean - alpha * min(L_poison, log C).
  std::optional<PoisonConfig> poison;
  /// Labelled set evaluated at each checkpoint for the metrics log; optional.
  std::optional<Dataset> validation;
};

struct TrainMetrics {
  long step = 0;
  double train_loss = 0.0;
  double val_loss = std::nan("");
  double poison_loss = std::nan("");
};

struct TrainResult {
  std::vector<MlpParams> checkpoints;
  std::vector<AdamState> adam_states;
  std::vector<TrainMetrics> metrics;
};

/// Mini-batch Adam on the (optionally poisoned) cross-entropy objective.
///
/// Deterministic given the config: batches come from a generator seeded by config.seed.
inline TrainResult adam_train(const MlpParams& init, const Dataset& train, const TrainConfig& config) {
  if (config.epochs < 0 || config.batch < 1 || config.checkpoint_every < 1) {
    throw Error("invalid training configuration");
  }
  if (config.poison && config.poison->alpha < 0.0) {
    throw Error("poison alpha must be non-negative");
  }
  const int classes = static_cast<int>(init.shape.output_dim());
  const BehaviorCost full_train = BehaviorCost::loss(init.shape, train);
  std::optional<BehaviorCost> full_val;
  std::optional<BehaviorCost> full_poison;
  if (config.validation) {
    full_val = BehaviorCost::loss(init.shape, *config.validation);
  }
  if (config.poison) {
    full_poison = BehaviorCost::loss(init.shape, config.poison->data);
  }
  const double poison_cap = std::log(static_cast<double>(classes));

  TrainResult result;
  Vector params = init.flat;
  AdamState adam = AdamState::zeros(params.size(), config.adam);
  const auto record = [&](long step) {
    result.checkpoints.emplace_back(init.shape, params);
    result.adam_states.push_back(adam);
    TrainMetrics m;
    m.step = step;
    m.train_loss = full_train(params);
    if (full_val) {
      m.val_loss = (*full_val)(params);
    }
    if (full_poison) {
      m.poison_loss = (*full_poison)(params);
    }
    result.metrics.push_back(m);
  };

  Rng rng{splitmix64(config.seed ^ 0xa0761d6478bd642fULL)};
  const Eigen::Index m = train.size();
  const Eigen::Index steps_per_epoch = (m + config.batch - 1) / config.batch;
  std::vector<Eigen::Index> poison_order;
  std::size_t poison_cursor = 0;
  if (config.poison) {
    poison_order = shuffled_rows(config.poison->data.size(), rng);
  }

  long step = 0;
  record(step);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled_rows(m, rng);
    for (Eigen::Index s = 0; s < steps_per_epoch; ++s) {
      const Eigen::Index begin = s * config.batch;
      const Eigen::Index count = std::min(config.batch, m - begin);
      std::vector<Eigen::Index> rows(order.begin() + begin, order.begin() + begin + count);
      const auto batch_cost = BehaviorCost::loss(init.shape, train.gather(rows, "batch"));
      auto [loss, grad] = batch_cost.value_and_gradient(params);
      if (config.poison) {
        std::vector<Eigen::Index> prow;
        for (Eigen::Index j = 0; j < count; ++j) {
          if (poison_cursor == poison_order.size()) {
            poison_order = shuffled_rows(config.poison->data.size(), rng);
            poison_cursor = 0;
          }
          prow.push_back(poison_order[poison_cursor++]);
        }
        const auto pcost = BehaviorCost::loss(init.shape, config.poison->data.gather(prow, "poison-batch"));
        auto [ploss, pgrad] = pcost.value_and_gradient(params);
        if (ploss < poison_cap) {
          grad -= config.poison->alpha * pgrad;
        }
        loss -= config.poison->alpha * std::min(ploss, poison_cap);
      }
      ++step;
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw Error("training diverged at step " + std::to_string(step));
      }
      adam_step(adam, params, grad);
      if (step % config.checkpoint_every == 0) {
        record(step);
      }
    }
  }
  if (result.metrics.back().step != step) {
    record(step);
  }
  return result;
}

}  // namespace starvol::models

#endif  // STARVOL_MODELS_TRAIN_HPP
