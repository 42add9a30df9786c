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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "scenenov/simd/kernels.hpp"
#include "scenenov/util/parallel.hpp"

namespace scenenov::simd {

#if defined(SCENENOV_HAVE_AVX2)
const KernelTable<float>& avx2_table_f32();
const KernelTable<double>& avx2_table_f64();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(SCENENOV_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("SCENENOV_SIMD")) {
    if (std::string_view(env) == "scalar") return Isa::kScalar;
  }
  return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

template <>
const KernelTable<float>* avx2_kernels<float>() {
#if defined(SCENENOV_HAVE_AVX2)
  if (cpu_has_avx2()) return &avx2_table_f32();
#endif
  return nullptr;
}

template <>
const KernelTable<double>* avx2_kernels<double>() {
#if defined(SCENENOV_HAVE_AVX2)
  if (cpu_has_avx2()) return &avx2_table_f64();
#endif
  return nullptr;
}

template <class T>
const KernelTable<T>& kernels() {
  if (current().load(std::memory_order_relaxed) == Isa::kAvx2) {
    if (const auto* t = avx2_kernels<T>()) return *t;
  }
  return scalar_kernels<T>();
}

template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();

template <class T>
void gemm(const GemmArgs<T>& args) {
  const auto& table = kernels<T>();
  if (num_threads() <= 1 || args.m * args.n * args.k < (1u << 18)) {
    table.gemm(args);
    return;
  }
  parallel_for(0, args.m, 96, [&](std::size_t b, std::size_t e) {
    GemmArgs<T> part = args;
    part.m = e - b;
    part.a = args.trans_a ? args.a + b : args.a + b * args.lda;
    part.c = args.c + b * args.ldc;
    table.gemm(part);
  });
}

template void gemm<float>(const GemmArgs<float>&);
template void gemm<double>(const GemmArgs<double>&);

Isa active_isa() { return current().load(); }

bool force_isa(Isa isa) {
  if (isa == Isa::kAvx2 && avx2_kernels<float>() == nullptr) return false;
  current().store(isa);
  return true;
}

}  // namespace scenenov::simd
