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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "scenenov/simd/kernels.hpp"
#include "scenenov/util/parallel.hpp"

using namespace scenenov::simd;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

template <class T>
T tol();
template <>
float tol<float>() {
  return 2e-5f;
}
template <>
double tol<double>() {
  return 1e-12;
}

template <class T>
void check_gemm_equivalence(const KernelTable<T>& fast) {
  std::mt19937_64 rng(42);
  const auto& ref = scalar_kernels<T>();
  const std::size_t sizes[] = {1, 5, 6, 7, 16, 17, 33, 100, 300};
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = sizes[rng() % 9], n = sizes[rng() % 9], k = sizes[rng() % 9];
    GemmArgs<T> g;
    g.trans_a = rng() % 2;
    g.trans_b = rng() % 2;
    g.m = m;
    g.n = n;
    g.k = k;
    g.alpha = static_cast<T>(trial % 3 == 0 ? 1.0 : 0.7);
    g.beta = static_cast<T>(trial % 4 == 0 ? 0.0 : (trial % 4 == 1 ? 1.0 : -0.5));
    auto a = random_vec<T>(m * k, rng);
    auto b = random_vec<T>(k * n, rng);
    g.a = a.data();
    g.lda = g.trans_a ? m : k;
    g.b = b.data();
    g.ldb = g.trans_b ? k : n;
    auto c0 = random_vec<T>(m * n, rng);
    auto c1 = c0;
    g.ldc = n;
    g.c = c0.data();
    ref.gemm(g);
    g.c = c1.data();
    fast.gemm(g);
    for (std::size_t i = 0; i < m * n; ++i) {
      const T scale = std::max<T>(1, static_cast<T>(std::sqrt(static_cast<double>(k))));
      REQUIRE(std::abs(c0[i] - c1[i]) <= tol<T>() * scale);
    }
  }
}

template <class T>
void check_streaming_equivalence(const KernelTable<T>& fast) {
  std::mt19937_64 rng(7);
  const auto& ref = scalar_kernels<T>();
  for (std::size_t n : {0u, 1u, 3u, 8u, 31u, 32u, 33u, 257u, 4096u}) {
    auto x = random_vec<T>(n, rng);
    auto y = random_vec<T>(n, rng);
    const T t = tol<T>() * static_cast<T>(std::max<std::size_t>(1, n));
    CHECK(std::abs(ref.dot(x.data(), y.data(), n) - fast.dot(x.data(), y.data(), n)) <= t);
    CHECK(std::abs(ref.sq_dist(x.data(), y.data(), n) - fast.sq_dist(x.data(), y.data(), n)) <= t);
    CHECK(std::abs(ref.sum(x.data(), n) - fast.sum(x.data(), n)) <= t);

    std::vector<T> o0(n), o1(n);
    ref.add(x.data(), y.data(), o0.data(), n);
    fast.add(x.data(), y.data(), o1.data(), n);
    CHECK(o0 == o1);
    ref.mul(x.data(), y.data(), o0.data(), n);
    fast.mul(x.data(), y.data(), o1.data(), n);
    CHECK(o0 == o1);
    ref.scale(T(0.25), x.data(), o0.data(), n);
    fast.scale(T(0.25), x.data(), o1.data(), n);
    CHECK(o0 == o1);
    ref.relu(x.data(), o0.data(), n);
    fast.relu(x.data(), o1.data(), n);
    CHECK(o0 == o1);

    std::vector<T> a0 = y, a1 = y;
    ref.relu_backward(x.data(), x.data(), a0.data(), n);
    fast.relu_backward(x.data(), x.data(), a1.data(), n);
    CHECK(a0 == a1);
    a0 = y;
    a1 = y;
    ref.axpy(T(0.5), x.data(), a0.data(), n);
    fast.axpy(T(0.5), x.data(), a1.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(a0[i] - a1[i]) <= tol<T>());
  }
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(scalar_kernels<float>().isa == Isa::kScalar);
  CHECK(scalar_kernels<double>().isa == Isa::kScalar);
  CHECK(isa_name(Isa::kAvx2) == "avx2");
}

TEST_CASE("avx2 gemm matches the scalar reference") {
  const auto* f = avx2_kernels<float>();
  const auto* d = avx2_kernels<double>();
  if (f == nullptr || d == nullptr) {
    MESSAGE("AVX2 variant unavailable; skipping equivalence");
    return;
  }
  check_gemm_equivalence<float>(*f);
  check_gemm_equivalence<double>(*d);
}

TEST_CASE("avx2 streaming kernels match the scalar reference") {
  const auto* f = avx2_kernels<float>();
  const auto* d = avx2_kernels<double>();
  if (f == nullptr || d == nullptr) return;
  check_streaming_equivalence<float>(*f);
  check_streaming_equivalence<double>(*d);
}

TEST_CASE("gemm rows do not depend on the row count or thread split") {
  std::mt19937_64 rng(3);
  const std::size_t m = 301, n = 70, k = 90;
  auto a = random_vec<float>(m * k, rng);
  auto b = random_vec<float>(k * n, rng);
  std::vector<float> full(m * n), part(n);
  GemmArgs<float> g;
  g.m = m;
  g.n = n;
  g.k = k;
  g.a = a.data();
  g.lda = k;
  g.b = b.data();
  g.ldb = n;
  g.c = full.data();
  g.ldc = n;
  gemm(g);
  for (std::size_t row : {0u, 6u, 150u, 300u}) {
    GemmArgs<float> r = g;
    r.m = 1;
    r.a = a.data() + row * k;
    r.c = part.data();
    gemm(r);
    for (std::size_t j = 0; j < n; ++j) REQUIRE(part[j] == full[row * n + j]);
  }
  scenenov::set_num_threads(4);
  std::vector<float> threaded(m * n);
  g.c = threaded.data();
  gemm(g);
  scenenov::set_num_threads(1);
  CHECK(threaded == full);
}

TEST_CASE("force_isa switches the active table") {
  const Isa before = active_isa();
  REQUIRE(force_isa(Isa::kScalar));
  CHECK(kernels<float>().isa == Isa::kScalar);
  if (avx2_kernels<float>() != nullptr) {
    REQUIRE(force_isa(Isa::kAvx2));
    CHECK(kernels<double>().isa == Isa::kAvx2);
  }
  force_isa(before);
}
