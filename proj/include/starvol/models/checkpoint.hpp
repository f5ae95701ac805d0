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

#ifndef STARVOL_MODELS_CHECKPOINT_HPP
#define STARVOL_MODELS_CHECKPOINT_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <starvol/error.hpp>
#include <starvol/models/mlp.hpp>
#include <starvol/models/train.hpp>

namespace starvol::models {

/// Versioned JSON checkpoint: parameters, shape, prior sigma and Adam buffers.
struct Checkpoint {
  MlpParams params;
  /// Per-parameter standard deviation of the initialization distribution.
  Vector init_sigma;
  std::optional<AdamState> adam;
  long step = 0;
  /// Free-form string metadata (dataset paths, run name, ...).
  std::map<std::string, std::string> meta;
};

namespace detail {

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::json shape_to_json(const MlpShape& shape) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : shape.layers()) {
    layers.push_back({{"in", l.in}, {"out", l.out}, {"activation", to_string(l.activation)}});
  }
  return layers;
}

inline MlpShape shape_from_json(const nlohmann::json& j) {
  std::vector<Layer> layers;
  for (const auto& l : j) {
    layers.push_back(
        {l.at("in").get<Eigen::Index>(), l.at("out").get<Eigen::Index>(), activation_from_string(l.at("activation"))});
  }
  return MlpShape(std::move(layers));
}

inline nlohmann::json to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["format"] = "starvol-checkpoint";
  j["version"] = 1;
  j["step"] = ck.step;
  j["shape"] = shape_to_json(ck.params.shape);
  j["params"] = detail::to_std(ck.params.flat);
  j["init_sigma"] = detail::to_std(ck.init_sigma);
  if (ck.adam) {
    j["adam"] = {{"mu", detail::to_std(ck.adam->mu)},
                 {"nu", detail::to_std(ck.adam->nu)},
                 {"step", ck.adam->step},
                 {"lr", ck.adam->hyper.lr},
                 {"beta1", ck.adam->hyper.beta1},
                 {"beta2", ck.adam->hyper.beta2},
                 {"eps", ck.adam->hyper.eps}};
  }
  j["meta"] = ck.meta;
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "starvol-checkpoint") {
    throw Error("not a starvol checkpoint");
  }
  if (j.value("version", 0) != 1) {
    throw Error("unsupported checkpoint version");
  }
  Checkpoint ck;
  ck.step = j.at("step").get<long>();
  ck.params = MlpParams(shape_from_json(j.at("shape")), detail::from_std(j.at("params").get<std::vector<double>>()));
  ck.init_sigma = detail::from_std(j.at("init_sigma").get<std::vector<double>>());
  if (ck.init_sigma.size() != ck.params.flat.size()) {
    throw Error("checkpoint init_sigma length does not match the parameters");
  }
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    AdamState s;
    s.mu = detail::from_std(a.at("mu").get<std::vector<double>>());
    s.nu = detail::from_std(a.at("nu").get<std::vector<double>>());
    s.step = a.at("step").get<long>();
    s.hyper = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
               a.at("eps").get<double>()};
    if (s.mu.size() != ck.params.flat.size() || s.nu.size() != ck.params.flat.size()) {
      throw Error("checkpoint Adam buffers do not match the parameters");
    }
    ck.adam = std::move(s);
  }
  if (j.contains("meta")) {
    ck.meta = j.at("meta").get<std::map<std::string, std::string>>();
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write checkpoint " + path.string());
  }
  out << to_json(ck).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot read checkpoint " + path.string());
  }
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace starvol::models

#endif  // STARVOL_MODELS_CHECKPOINT_HPP
