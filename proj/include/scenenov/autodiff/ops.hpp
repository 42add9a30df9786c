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

// Differentiable primitives. Shape errors raise ShapeError naming both
// operands' shapes. Broadcasting is limited to "b's shape is a suffix of a's
// shape" (b repeats over a's leading dimensions).

namespace scenenov::ad {

// a: [..., m, k] (or [..., k, m] when trans_a). b is either 2-D and shared
// across a's leading dimensions, or carries the same leading dimensions as a.
template <class T>
Var<T> matmul(Var<T> a, Var<T> b, bool trans_a = false, bool trans_b = false);

// x: [..., in] times w: [in, out] plus bias: [out].
template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias);

template <class T>
Var<T> add(Var<T> a, Var<T> b);
template <class T>
Var<T> sub(Var<T> a, Var<T> b);
template <class T>
Var<T> mul(Var<T> a, Var<T> b);
template <class T>
Var<T> scale(Var<T> a, T factor);
template <class T>
Var<T> add_scalar(Var<T> a, T c);

template <class T>
Var<T> relu(Var<T> a);
// tanh approximation
template <class T>
Var<T> gelu(Var<T> a);
template <class T>
Var<T> sigmoid(Var<T> a);

// Along the last axis.
template <class T>
Var<T> softmax(Var<T> a);
// Normalizes over the last axis, then applies gamma * x + beta ([last]).
template <class T>
Var<T> layernorm(Var<T> a, Var<T> gamma, Var<T> beta, T eps = T(1e-5));

template <class T>
Var<T> sum(Var<T> a);
template <class T>
Var<T> mean(Var<T> a);
// Removes `axis`.
template <class T>
Var<T> sum(Var<T> a, std::size_t axis);
template <class T>
Var<T> mean(Var<T> a, std::size_t axis);

template <class T>
Var<T> reshape(Var<T> a, Shape shape);
template <class T>
Var<T> permute(Var<T> a, const std::vector<std::size_t>& perm);
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);
template <class T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t begin, std::size_t end);
// Prepends a dimension of size n, repeating a.
template <class T>
Var<T> repeat_leading(Var<T> a, std::size_t n);

template <class T>
Var<T> squared_difference(Var<T> a, Var<T> b);

// x: [N, H, W, Cin] (NHWC), w: [kh, kw, Cin, Cout], bias: [Cout].
template <class T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> bias, std::size_t stride, std::size_t pad);

// x: [N, H, W, C] -> [N, 2H, 2W, C]
template <class T>
Var<T> upsample_nearest2x(Var<T> x);

}  // namespace scenenov::ad
