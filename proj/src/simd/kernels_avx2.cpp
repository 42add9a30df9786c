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

// Compiled with -mavx2 -mfma. Nothing in here may run before dispatch has
// confirmed CPU support.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <vector>

#include "scenenov/simd/kernels.hpp"

namespace scenenov::simd {
namespace {

template <class T>
struct Vec;

template <>
struct Vec<float> {
  using V = __m256;
  static constexpr std::size_t kWidth = 8;
  static V zero() { return _mm256_setzero_ps(); }
  static V load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(float x) { return _mm256_set1_ps(x); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static V sub(V a, V b) { return _mm256_sub_ps(a, b); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
  static V max(V a, V b) { return _mm256_max_ps(a, b); }
  static V gt_mask(V a, V b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static V and_(V a, V b) { return _mm256_and_ps(a, b); }
  static float hsum(V v) {
    alignas(32) float t[8];
    _mm256_store_ps(t, v);
    return ((t[0] + t[1]) + (t[2] + t[3])) + ((t[4] + t[5]) + (t[6] + t[7]));
  }
};

template <>
struct Vec<double> {
  using V = __m256d;
  static constexpr std::size_t kWidth = 4;
  static V zero() { return _mm256_setzero_pd(); }
  static V load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(double x) { return _mm256_set1_pd(x); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static V sub(V a, V b) { return _mm256_sub_pd(a, b); }
  static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
  static V max(V a, V b) { return _mm256_max_pd(a, b); }
  static V gt_mask(V a, V b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static V and_(V a, V b) { return _mm256_and_pd(a, b); }
  static double hsum(V v) {
    alignas(32) double t[4];
    _mm256_store_pd(t, v);
    return (t[0] + t[1]) + (t[2] + t[3]);
  }
};

// ---------------------------------------------------------------------------
// GEMM: packed panels, 6 x (2 * width) register tile.

constexpr std::size_t kMr = 6;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 96;
constexpr std::size_t kNc = 2048;

template <class T>
constexpr std::size_t nr() {
  return 2 * Vec<T>::kWidth;
}

// Packs rows [i0, i0+mc) x cols [p0, p0+kc) of op(A) into kMr-row panels,
// zero padded.
template <class T>
void pack_a(const GemmArgs<T>& g, std::size_t i0, std::size_t mc,
            std::size_t p0, std::size_t kc, T* dst) {
  for (std::size_t ir = 0; ir < mc; ir += kMr) {
    const std::size_t rows = std::min(kMr, mc - ir);
    if (!g.trans_a) {
      for (std::size_t p = 0; p < kc; ++p) {
        std::size_t r = 0;
        for (; r < rows; ++r) dst[p * kMr + r] = g.a[(i0 + ir + r) * g.lda + p0 + p];
        for (; r < kMr; ++r) dst[p * kMr + r] = T(0);
      }
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        const T* src = g.a + (p0 + p) * g.lda + i0 + ir;
        std::size_t r = 0;
        for (; r < rows; ++r) dst[p * kMr + r] = src[r];
        for (; r < kMr; ++r) dst[p * kMr + r] = T(0);
      }
    }
    dst += kc * kMr;
  }
}

template <class T>
void pack_b(const GemmArgs<T>& g, std::size_t p0, std::size_t kc,
            std::size_t j0, std::size_t nc, T* dst) {
  constexpr std::size_t kNr = nr<T>();
  for (std::size_t jr = 0; jr < nc; jr += kNr) {
    const std::size_t cols = std::min(kNr, nc - jr);
    if (!g.trans_b) {
      for (std::size_t p = 0; p < kc; ++p) {
        const T* src = g.b + (p0 + p) * g.ldb + j0 + jr;
        T* d = dst + p * kNr;
        if (cols == kNr) {
          std::memcpy(d, src, kNr * sizeof(T));
        } else {
          std::size_t c = 0;
          for (; c < cols; ++c) d[c] = src[c];
          for (; c < kNr; ++c) d[c] = T(0);
        }
      }
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        T* d = dst + p * kNr;
        std::size_t c = 0;
        for (; c < cols; ++c) d[c] = g.b[(j0 + jr + c) * g.ldb + p0 + p];
        for (; c < kNr; ++c) d[c] = T(0);
      }
    }
    dst += kc * kNr;
  }
}

template <class T>
inline void micro_kernel(std::size_t kc, const T* pa, const T* pb, T* tile) {
  using VT = Vec<T>;
  using V = typename VT::V;
  constexpr std::size_t W = VT::kWidth;
  V c00 = VT::zero(), c01 = VT::zero(), c10 = VT::zero(), c11 = VT::zero();
  V c20 = VT::zero(), c21 = VT::zero(), c30 = VT::zero(), c31 = VT::zero();
  V c40 = VT::zero(), c41 = VT::zero(), c50 = VT::zero(), c51 = VT::zero();
  for (std::size_t p = 0; p < kc; ++p) {
    const V b0 = VT::load(pb);
    const V b1 = VT::load(pb + W);
    V a = VT::set1(pa[0]);
    c00 = VT::fma(a, b0, c00);
    c01 = VT::fma(a, b1, c01);
    a = VT::set1(pa[1]);
    c10 = VT::fma(a, b0, c10);
    c11 = VT::fma(a, b1, c11);
    a = VT::set1(pa[2]);
    c20 = VT::fma(a, b0, c20);
    c21 = VT::fma(a, b1, c21);
    a = VT::set1(pa[3]);
    c30 = VT::fma(a, b0, c30);
    c31 = VT::fma(a, b1, c31);
    a = VT::set1(pa[4]);
    c40 = VT::fma(a, b0, c40);
    c41 = VT::fma(a, b1, c41);
    a = VT::set1(pa[5]);
    c50 = VT::fma(a, b0, c50);
    c51 = VT::fma(a, b1, c51);
    pa += kMr;
    pb += 2 * W;
  }
  VT::store(tile + 0 * 2 * W, c00);
  VT::store(tile + 0 * 2 * W + W, c01);
  VT::store(tile + 1 * 2 * W, c10);
  VT::store(tile + 1 * 2 * W + W, c11);
  VT::store(tile + 2 * 2 * W, c20);
  VT::store(tile + 2 * 2 * W + W, c21);
  VT::store(tile + 3 * 2 * W, c30);
  VT::store(tile + 3 * 2 * W + W, c31);
  VT::store(tile + 4 * 2 * W, c40);
  VT::store(tile + 4 * 2 * W + W, c41);
  VT::store(tile + 5 * 2 * W, c50);
  VT::store(tile + 5 * 2 * W + W, c51);
}

// Writes alpha*tile (+ beta*C on the first k block, + C afterwards).
template <class T>
inline void store_tile(const T* tile, T* c, std::size_t ldc, std::size_t rows,
                       std::size_t cols, T alpha, T beta, bool first) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  constexpr std::size_t kNr = 2 * W;
  if (cols == kNr) {
    const auto va = VT::set1(alpha);
    const auto vb = VT::set1(beta);
    for (std::size_t r = 0; r < rows; ++r) {
      T* crow = c + r * ldc;
      for (std::size_t h = 0; h < 2; ++h) {
        auto v = VT::mul(va, VT::load(tile + r * kNr + h * W));
        if (!first) {
          v = VT::add(v, VT::load(crow + h * W));
        } else if (beta != T(0)) {
          v = VT::fma(vb, VT::load(crow + h * W), v);
        }
        VT::store(crow + h * W, v);
      }
    }
    return;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    T* crow = c + r * ldc;
    for (std::size_t j = 0; j < cols; ++j) {
      T v = alpha * tile[r * kNr + j];
      if (!first) {
        v = v + crow[j];
      } else if (beta != T(0)) {
        v = std::fma(beta, crow[j], v);
      }
      crow[j] = v;
    }
  }
}

template <class T>
void gemm_avx2(const GemmArgs<T>& g) {
  constexpr std::size_t kNr = nr<T>();
  if (g.m == 0 || g.n == 0) return;
  if (g.k == 0 || g.alpha == T(0)) {
    for (std::size_t i = 0; i < g.m; ++i) {
      T* crow = g.c + i * g.ldc;
      for (std::size_t j = 0; j < g.n; ++j) crow[j] = g.beta == T(0) ? T(0) : g.beta * crow[j];
    }
    return;
  }
  thread_local std::vector<T> buf_a;
  thread_local std::vector<T> buf_b;
  alignas(64) T tile[kMr * kNr];

  for (std::size_t j0 = 0; j0 < g.n; j0 += kNc) {
    const std::size_t nc = std::min(kNc, g.n - j0);
    const std::size_t nc_pad = (nc + kNr - 1) / kNr * kNr;
    for (std::size_t p0 = 0; p0 < g.k; p0 += kKc) {
      const std::size_t kc = std::min(kKc, g.k - p0);
      const bool first = p0 == 0;
      buf_b.resize(kc * nc_pad);
      pack_b(g, p0, kc, j0, nc, buf_b.data());
      for (std::size_t i0 = 0; i0 < g.m; i0 += kMc) {
        const std::size_t mc = std::min(kMc, g.m - i0);
        const std::size_t mc_pad = (mc + kMr - 1) / kMr * kMr;
        buf_a.resize(kc * mc_pad);
        pack_a(g, i0, mc, p0, kc, buf_a.data());
        for (std::size_t jr = 0; jr < nc; jr += kNr) {
          const std::size_t cols = std::min(kNr, nc - jr);
          const T* pb = buf_b.data() + (jr / kNr) * kc * kNr;
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            const std::size_t rows = std::min(kMr, mc - ir);
            const T* pa = buf_a.data() + (ir / kMr) * kc * kMr;
            micro_kernel<T>(kc, pa, pb, tile);
            store_tile<T>(tile, g.c + (i0 + ir) * g.ldc + j0 + jr, g.ldc, rows,
                          cols, g.alpha, g.beta, first);
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Streaming kernels. Four independent accumulators keep the reduction order
// fixed for a given length.

template <class T>
T dot_avx2(const T* x, const T* y, std::size_t n) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  auto s0 = VT::zero(), s1 = VT::zero(), s2 = VT::zero(), s3 = VT::zero();
  std::size_t i = 0;
  for (; i + 4 * W <= n; i += 4 * W) {
    s0 = VT::fma(VT::load(x + i), VT::load(y + i), s0);
    s1 = VT::fma(VT::load(x + i + W), VT::load(y + i + W), s1);
    s2 = VT::fma(VT::load(x + i + 2 * W), VT::load(y + i + 2 * W), s2);
    s3 = VT::fma(VT::load(x + i + 3 * W), VT::load(y + i + 3 * W), s3);
  }
  for (; i + W <= n; i += W) s0 = VT::fma(VT::load(x + i), VT::load(y + i), s0);
  T s = VT::hsum(VT::add(VT::add(s0, s1), VT::add(s2, s3)));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <class T>
T sq_dist_avx2(const T* x, const T* y, std::size_t n) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  auto s0 = VT::zero(), s1 = VT::zero(), s2 = VT::zero(), s3 = VT::zero();
  std::size_t i = 0;
  for (; i + 4 * W <= n; i += 4 * W) {
    auto d0 = VT::sub(VT::load(x + i), VT::load(y + i));
    auto d1 = VT::sub(VT::load(x + i + W), VT::load(y + i + W));
    auto d2 = VT::sub(VT::load(x + i + 2 * W), VT::load(y + i + 2 * W));
    auto d3 = VT::sub(VT::load(x + i + 3 * W), VT::load(y + i + 3 * W));
    s0 = VT::fma(d0, d0, s0);
    s1 = VT::fma(d1, d1, s1);
    s2 = VT::fma(d2, d2, s2);
    s3 = VT::fma(d3, d3, s3);
  }
  for (; i + W <= n; i += W) {
    auto d = VT::sub(VT::load(x + i), VT::load(y + i));
    s0 = VT::fma(d, d, s0);
  }
  T s = VT::hsum(VT::add(VT::add(s0, s1), VT::add(s2, s3)));
  for (; i < n; ++i) {
    const T d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

template <class T>
T sum_avx2(const T* x, std::size_t n) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  auto s0 = VT::zero(), s1 = VT::zero(), s2 = VT::zero(), s3 = VT::zero();
  std::size_t i = 0;
  for (; i + 4 * W <= n; i += 4 * W) {
    s0 = VT::add(VT::load(x + i), s0);
    s1 = VT::add(VT::load(x + i + W), s1);
    s2 = VT::add(VT::load(x + i + 2 * W), s2);
    s3 = VT::add(VT::load(x + i + 3 * W), s3);
  }
  for (; i + W <= n; i += W) s0 = VT::add(VT::load(x + i), s0);
  T s = VT::hsum(VT::add(VT::add(s0, s1), VT::add(s2, s3)));
  for (; i < n; ++i) s += x[i];
  return s;
}

template <class T>
void axpy_avx2(T a, const T* x, T* y, std::size_t n) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  const auto va = VT::set1(a);
  std::size_t i = 0;
  for (; i + W <= n; i += W) VT::store(y + i, VT::fma(va, VT::load(x + i), VT::load(y + i)));
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

template <class T>
void add_avx2(const T* x, const T* y, T* out, std::size_t n) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  std::size_t i = 0;
  for (; i + W <= n; i += W) VT::store(out + i, VT::add(VT::load(x + i), VT::load(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

template <class T>
void mul_avx2(const T* x, const T* y, T* out, std::size_t n) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  std::size_t i = 0;
  for (; i + W <= n; i += W) VT::store(out + i, VT::mul(VT::load(x + i), VT::load(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

template <class T>
void scale_avx2(T a, const T* x, T* out, std::size_t n) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  const auto va = VT::set1(a);
  std::size_t i = 0;
  for (; i + W <= n; i += W) VT::store(out + i, VT::mul(va, VT::load(x + i)));
  for (; i < n; ++i) out[i] = a * x[i];
}

template <class T>
void relu_avx2(const T* x, T* out, std::size_t n) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  const auto z = VT::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) VT::store(out + i, VT::max(VT::load(x + i), z));
  for (; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_backward_avx2(const T* x, const T* g, T* out, std::size_t n) {
  using VT = Vec<T>;
  constexpr std::size_t W = VT::kWidth;
  const auto z = VT::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    const auto mask = VT::gt_mask(VT::load(x + i), z);
    VT::store(out + i, VT::add(VT::load(out + i), VT::and_(mask, VT::load(g + i))));
  }
  for (; i < n; ++i) {
    if (x[i] > T(0)) out[i] += g[i];
  }
}

template <class T>
KernelTable<T> make_avx2_table() {
  return KernelTable<T>{Isa::kAvx2,      &gemm_avx2<T>,  &dot_avx2<T>,
                        &sq_dist_avx2<T>, &sum_avx2<T>,   &axpy_avx2<T>,
                        &add_avx2<T>,     &mul_avx2<T>,   &scale_avx2<T>,
                        &relu_avx2<T>,    &relu_backward_avx2<T>};
}

}  // namespace

// Referenced from dispatch.cpp only after the CPUID check.
const KernelTable<float>& avx2_table_f32() {
  static const KernelTable<float> table = make_avx2_table<float>();
  return table;
}
const KernelTable<double>& avx2_table_f64() {
  static const KernelTable<double> table = make_avx2_table<double>();
  return table;
}

}  // namespace scenenov::simd
