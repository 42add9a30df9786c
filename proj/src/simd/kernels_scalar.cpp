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

#include <algorithm>
#include <cstddef>

#include "scenenov/simd/kernels.hpp"

namespace scenenov::simd {
namespace {

template <class T>
void gemm_ref(const GemmArgs<T>& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    T* crow = g.c + i * g.ldc;
    if (g.beta == T(0)) {
      std::fill(crow, crow + g.n, T(0));
    } else if (g.beta != T(1)) {
      for (std::size_t j = 0; j < g.n; ++j) crow[j] *= g.beta;
    }
  }
  if (g.k == 0 || g.alpha == T(0)) return;
  for (std::size_t i = 0; i < g.m; ++i) {
    T* crow = g.c + i * g.ldc;
    for (std::size_t p = 0; p < g.k; ++p) {
      const T aip = g.trans_a ? g.a[p * g.lda + i] : g.a[i * g.lda + p];
      const T s = g.alpha * aip;
      if (g.trans_b) {
        for (std::size_t j = 0; j < g.n; ++j) crow[j] += s * g.b[j * g.ldb + p];
      } else {
        const T* brow = g.b + p * g.ldb;
        for (std::size_t j = 0; j < g.n; ++j) crow[j] += s * brow[j];
      }
    }
  }
}

template <class T>
T dot_ref(const T* x, const T* y, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <class T>
T sq_dist_ref(const T* x, const T* y, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

template <class T>
T sum_ref(const T* x, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

template <class T>
void axpy_ref(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void add_ref(const T* x, const T* y, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

template <class T>
void mul_ref(const T* x, const T* y, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

template <class T>
void scale_ref(T a, const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

template <class T>
void relu_ref(const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_backward_ref(const T* x, const T* g, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > T(0)) out[i] += g[i];
  }
}

template <class T>
constexpr KernelTable<T> make_scalar_table() {
  return KernelTable<T>{Isa::kScalar,  &gemm_ref<T>,  &dot_ref<T>,
                        &sq_dist_ref<T>, &sum_ref<T>,  &axpy_ref<T>,
                        &add_ref<T>,     &mul_ref<T>,  &scale_ref<T>,
                        &relu_ref<T>,    &relu_backward_ref<T>};
}

constexpr KernelTable<float> kScalarF = make_scalar_table<float>();
constexpr KernelTable<double> kScalarD = make_scalar_table<double>();

}  // namespace

template <>
const KernelTable<float>& scalar_kernels<float>() {
  return kScalarF;
}
template <>
const KernelTable<double>& scalar_kernels<double>() {
  return kScalarD;
}

}  // namespace scenenov::simd
