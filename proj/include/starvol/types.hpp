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

#ifndef STARVOL_TYPES_HPP
#define STARVOL_TYPES_HPP

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace starvol {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

/// Independent generator for sample `index` of a run seeded with `seed`.
///
/// Streams depend only on (seed, index), so results do not depend on how samples
/// are scheduled across threads.
inline Rng sample_stream(std::uint64_t seed, std::uint64_t index) {
  return Rng{splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL))};
}

/// Fills a vector with independent standard normal draws.
inline Vector standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = normal(rng);
  }
  return out;
}

}  // namespace starvol

#endif  // STARVOL_TYPES_HPP
