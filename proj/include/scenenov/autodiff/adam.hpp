/*
 * Copyright 2026 The Scene Novelty Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <vector>

#include "scenenov/autodiff/tape.hpp"

namespace scenenov::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  std::size_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update from each parameter's accumulated grad.
// Moment buffers are created on the first call.
template <class T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state,
               const AdamConfig& cfg);

}  // namespace scenenov::ad
