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

// Dense arithmetic kernels behind the tensor library and the detectors.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant compiled in its own translation unit. The variant is
// chosen once at startup from CPUID; SCENENOV_SIMD=scalar forces the
// reference path. Both paths are kept equivalence-tested.

#include <cstddef>
#include <string_view>

namespace scenenov::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C, where op(A) is m x k
// and op(B) is k x n. lda/ldb/ldc are row strides of the stored matrices.
template <class T>
struct GemmArgs {
  bool trans_a = false;
  bool trans_b = false;
  std::size_t m = 0, n = 0, k = 0;
  T alpha = T(1);
  const T* a = nullptr;
  std::size_t lda = 0;
  const T* b = nullptr;
  std::size_t ldb = 0;
  T beta = T(0);
  T* c = nullptr;
  std::size_t ldc = 0;
};

template <class T>
struct KernelTable {
  Isa isa;
  void (*gemm)(const GemmArgs<T>& args);
  T (*dot)(const T* x, const T* y, std::size_t n);
  T (*sq_dist)(const T* x, const T* y, std::size_t n);
  T (*sum)(const T* x, std::size_t n);
  // y += a * x
  void (*axpy)(T a, const T* x, T* y, std::size_t n);
  void (*add)(const T* x, const T* y, T* out, std::size_t n);
  void (*mul)(const T* x, const T* y, T* out, std::size_t n);
  void (*scale)(T a, const T* x, T* out, std::size_t n);
  void (*relu)(const T* x, T* out, std::size_t n);
  // out += g where x > 0
  void (*relu_backward)(const T* x, const T* g, T* out, std::size_t n);
};

template <class T>
const KernelTable<T>& scalar_kernels();

// nullptr when the variant is not compiled in or the CPU lacks the features.
template <class T>
const KernelTable<T>* avx2_kernels();

// The table selected for this process.
template <class T>
const KernelTable<T>& kernels();

// GEMM through the active table, split by rows across the configured
// workers (see util/parallel.hpp). Row results do not depend on the split.
template <class T>
void gemm(const GemmArgs<T>& args);

Isa active_isa();

// Test hook: switch the process-wide table. Returns false when the requested
// variant is unavailable on this machine.
bool force_isa(Isa isa);

}  // namespace scenenov::simd
