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

#ifndef STARVOL_STARVOL_HPP
#define STARVOL_STARVOL_HPP

#include <starvol/error.hpp>
#include <starvol/geometry.hpp>
#include <starvol/models/checkpoint.hpp>
#include <starvol/models/costs.hpp>
#include <starvol/models/dataset.hpp>
#include <starvol/models/hessian.hpp>
#include <starvol/models/mdl.hpp>
#include <starvol/models/mlp.hpp>
#include <starvol/models/train.hpp>
#include <starvol/numerics.hpp>
#include <starvol/precondition.hpp>
#include <starvol/toyvalidate.hpp>
#include <starvol/types.hpp>

#endif  // STARVOL_STARVOL_HPP
