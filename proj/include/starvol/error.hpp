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

#ifndef STARVOL_ERROR_HPP
#define STARVOL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace starvol {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a radius search runs out of iterations before its bracket converges.
class RadiusSearchError : public Error {
 public:
  RadiusSearchError(const std::string& what, double lower, double upper)
      : Error(what), lower_(lower), upper_(upper) {}

  [[nodiscard]] double lower() const noexcept { return lower_; }
  [[nodiscard]] double upper() const noexcept { return upper_; }

 private:
  double lower_;
  double upper_;
};

/// Raised when the cost function returns NaN or infinity.
class CostEvaluationError : public Error {
 public:
  CostEvaluationError() : Error("cost evaluation failed") {}
};

}  // namespace starvol

#endif  // STARVOL_ERROR_HPP
