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
#include <limits>
#include <random>

#include "doctest.h"
#include "scenenov/autodiff/adam.hpp"
#include "scenenov/autodiff/grad_check.hpp"
#include "scenenov/autodiff/ops.hpp"
#include "scenenov/errors.hpp"

using namespace scenenov;
using namespace scenenov::ad;

namespace {

Tensor<double> randn(Shape s, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor<double> t(std::move(s));
  for (auto& v : t.values()) v = n(rng);
  return t;
}

// Values bounded away from zero so relu-like kinks are never straddled.
Tensor<double> away_from_zero(Shape s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.5);
  Tensor<double> t(std::move(s));
  for (auto& v : t.values()) v = (rng() % 2 ? 1.0 : -1.0) * u(rng);
  return t;
}

// Weighted sum with fixed random weights turns any tensor into a scalar with
// a non-trivial gradient.
Var<double> project(Var<double> v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor<double> w = randn(v.shape(), rng);
  return sum(mul(v, v.tape->constant(w)));
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("relu forward and gradient mask") {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>({2}, {-1.0, 2.0}));
  auto y = relu(x);
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == 2.0);
  t.backward(sum(y));
  const auto g = t.grad(x);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
}

TEST_CASE("softmax of a constant vector is uniform") {
  Tape<double> t;
  auto y = softmax(t.constant(Tensor<double>({5}, 3.25)));
  for (double v : y.value().values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("conv2d with a 3x3 identity kernel reproduces the image") {
  std::mt19937_64 rng(1);
  Tape<double> t;
  auto img = randn({2, 7, 5, 1}, rng);
  Tensor<double> k({3, 3, 1, 1});
  k[4] = 1.0;
  auto y = conv2d(t.constant(img), t.constant(k), t.constant(Tensor<double>({1})), 1, 1);
  REQUIRE(y.shape() == img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(y.value()[i] == img[i]);
}

TEST_CASE("grad_check: quadratic is exact") {
  std::mt19937_64 rng(2);
  auto r = grad_check([](Tape<double>&, const std::vector<Var<double>>& in) {
    return sum(mul(in[0], in[0]));
  }, {randn({10}, rng)});
  CHECK(r.max_rel_error < 1e-9);
}

TEST_CASE("grad_check: random two-layer MLP") {
  std::mt19937_64 rng(3);
  auto r = grad_check(
      [](Tape<double>&, const std::vector<Var<double>>& in) {
        auto h = gelu(linear(in[0], in[1], in[2]));
        return project(linear(h, in[3], in[4]), 11);
      },
      {randn({4, 6}, rng), randn({6, 8}, rng, 0.5), randn({8}, rng, 0.1), randn({8, 3}, rng, 0.5),
       randn({3}, rng, 0.1)});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("grad_check: relu probed away from the kink") {
  std::mt19937_64 rng(4);
  auto x = away_from_zero({20}, rng);
  for (double v : x.values()) REQUIRE(std::abs(v) > 1e-3);
  auto r = grad_check([](Tape<double>&, const std::vector<Var<double>>& in) {
    return project(relu(in[0]), 5);
  }, {x});
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("every primitive passes the finite-difference check") {
  std::mt19937_64 rng(5);
  using In = std::vector<Var<double>>;
  struct Case {
    const char* name;
    std::function<Var<double>(Tape<double>&, const In&)> fn;
    std::vector<Tensor<double>> inputs;
  };
  std::vector<Case> cases = {
      {"matmul", [](Tape<double>&, const In& v) { return project(matmul(v[0], v[1]), 1); },
       {randn({2, 3, 4}, rng), randn({4, 5}, rng)}},
      {"matmul_ta", [](Tape<double>&, const In& v) { return project(matmul(v[0], v[1], true), 2); },
       {randn({2, 4, 3}, rng), randn({4, 5}, rng)}},
      {"matmul_batched_tb",
       [](Tape<double>&, const In& v) { return project(matmul(v[0], v[1], false, true), 3); },
       {randn({2, 3, 4}, rng), randn({2, 5, 4}, rng)}},
      {"matmul_batched_ta_tb",
       [](Tape<double>&, const In& v) { return project(matmul(v[0], v[1], true, true), 4); },
       {randn({2, 4, 3}, rng), randn({2, 5, 4}, rng)}},
      {"linear", [](Tape<double>&, const In& v) { return project(linear(v[0], v[1], v[2]), 5); },
       {randn({3, 4}, rng), randn({4, 2}, rng), randn({2}, rng)}},
      {"add_broadcast", [](Tape<double>&, const In& v) { return project(add(v[0], v[1]), 6); },
       {randn({3, 4}, rng), randn({4}, rng)}},
      {"sub_broadcast", [](Tape<double>&, const In& v) { return project(sub(v[0], v[1]), 7); },
       {randn({3, 4}, rng), randn({4}, rng)}},
      {"mul_broadcast", [](Tape<double>&, const In& v) { return project(mul(v[0], v[1]), 8); },
       {randn({3, 4}, rng), randn({4}, rng)}},
      {"scale", [](Tape<double>&, const In& v) { return project(scale(v[0], 0.3), 9); },
       {randn({6}, rng)}},
      {"add_scalar", [](Tape<double>&, const In& v) { return project(add_scalar(v[0], 0.3), 10); },
       {randn({6}, rng)}},
      {"relu", [](Tape<double>&, const In& v) { return project(relu(v[0]), 11); },
       {away_from_zero({3, 5}, rng)}},
      {"gelu", [](Tape<double>&, const In& v) { return project(gelu(v[0]), 12); },
       {randn({3, 5}, rng, 2.0)}},
      {"sigmoid", [](Tape<double>&, const In& v) { return project(sigmoid(v[0]), 13); },
       {randn({3, 5}, rng, 3.0)}},
      {"softmax", [](Tape<double>&, const In& v) { return project(softmax(v[0]), 14); },
       {randn({3, 5}, rng)}},
      {"layernorm",
       [](Tape<double>&, const In& v) { return project(layernorm(v[0], v[1], v[2]), 15); },
       {randn({3, 6}, rng), randn({6}, rng), randn({6}, rng)}},
      {"sum_axis", [](Tape<double>&, const In& v) { return project(sum(v[0], 1), 16); },
       {randn({2, 3, 4}, rng)}},
      {"mean_axis", [](Tape<double>&, const In& v) { return project(mean(v[0], 0), 17); },
       {randn({2, 3, 4}, rng)}},
      {"mean_all", [](Tape<double>&, const In& v) { return mean(mul(v[0], v[0])); },
       {randn({2, 3}, rng)}},
      {"reshape", [](Tape<double>&, const In& v) { return project(reshape(v[0], {3, 4}), 18); },
       {randn({2, 6}, rng)}},
      {"permute",
       [](Tape<double>&, const In& v) { return project(permute(v[0], {2, 0, 3, 1}), 19); },
       {randn({2, 3, 4, 2}, rng)}},
      {"concat",
       [](Tape<double>&, const In& v) { return project(concat<double>({v[0], v[1]}, 1), 20); },
       {randn({2, 2, 3}, rng), randn({2, 1, 3}, rng)}},
      {"slice", [](Tape<double>&, const In& v) { return project(slice(v[0], 1, 1, 3), 21); },
       {randn({2, 4, 3}, rng)}},
      {"repeat_leading",
       [](Tape<double>&, const In& v) { return project(repeat_leading(v[0], 3), 22); },
       {randn({2, 3}, rng)}},
      {"squared_difference",
       [](Tape<double>&, const In& v) { return project(squared_difference(v[0], v[1]), 23); },
       {randn({4, 3}, rng), randn({4, 3}, rng)}},
      {"conv2d_s1p1",
       [](Tape<double>&, const In& v) { return project(conv2d(v[0], v[1], v[2], 1, 1), 24); },
       {randn({2, 5, 4, 2}, rng), randn({3, 3, 2, 3}, rng), randn({3}, rng)}},
      {"conv2d_s2p1",
       [](Tape<double>&, const In& v) { return project(conv2d(v[0], v[1], v[2], 2, 1), 25); },
       {randn({1, 6, 6, 2}, rng), randn({3, 3, 2, 2}, rng), randn({2}, rng)}},
      {"conv2d_1x1",
       [](Tape<double>&, const In& v) { return project(conv2d(v[0], v[1], v[2], 1, 0), 26); },
       {randn({2, 3, 3, 2}, rng), randn({1, 1, 2, 4}, rng), randn({4}, rng)}},
      {"upsample",
       [](Tape<double>&, const In& v) { return project(upsample_nearest2x(v[0]), 27); },
       {randn({1, 2, 3, 2}, rng)}},
  };
  for (auto& c : cases) {
    CAPTURE(c.name);
    auto r = grad_check(c.fn, c.inputs);
    CHECK(r.max_rel_error < kTol);
  }
}

TEST_CASE("grad_check rejects non-scalar programs") {
  std::mt19937_64 rng(6);
  CHECK_THROWS_AS(grad_check([](Tape<double>&, const std::vector<Var<double>>& in) { return in[0]; },
                             {randn({3}, rng)}),
                  UsageError);
}

TEST_CASE("shape errors name both shapes") {
  Tape<float> t;
  auto a = t.constant(Tensor<float>({2, 3}));
  auto b = t.constant(Tensor<float>({4, 5}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(slice(a, 1, 2, 5), ShapeError);
}

TEST_CASE("non-finite values trip a numeric error") {
  Tape<double> t;
  auto x = t.constant(Tensor<double>({2}, {1.0, std::numeric_limits<double>::infinity()}));
  CHECK_THROWS_AS(scale(x, 2.0), NumericError);
  auto big = t.constant(Tensor<double>({1}, {1e200}));
  CHECK_THROWS_AS(mul(big, big), NumericError);
}

TEST_CASE("parameters accumulate gradients across uses") {
  Parameter<double> p("w", Tensor<double>({3}, {1.0, 2.0, 3.0}));
  Tape<double> t;
  auto a = t.param(p);
  auto b = t.param(p);
  t.backward(sum(mul(a, b)));
  CHECK(p.grad[0] == 2.0);
  CHECK(p.grad[2] == 6.0);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Parameter<double> p("w", Tensor<double>({3}, {0.5, -1.0, 2.0}));
  AdamState<double> st;
  adam_step<double>({&p}, st, AdamConfig{});
  CHECK(p.value == Tensor<double>({3}, {0.5, -1.0, 2.0}));
}

TEST_CASE("adam: first step with zero betas is a sign-like step") {
  Parameter<double> p("w", Tensor<double>({3}, {0.5, -1.0, 2.0}));
  p.grad = Tensor<double>({3}, {0.2, -3.0, 0.0});
  AdamState<double> st;
  AdamConfig cfg{0.01, 0.0, 0.0, 1e-8};
  adam_step<double>({&p}, st, cfg);
  const double expect[3] = {0.5 - 0.01 * 0.2 / (0.2 + 1e-8), -1.0 - 0.01 * -3.0 / (3.0 + 1e-8), 2.0};
  for (int i = 0; i < 3; ++i) CHECK(p.value[i] == doctest::Approx(expect[i]).epsilon(1e-15));
}

TEST_CASE("adam: identical runs give identical state") {
  auto run = [] {
    Parameter<float> p("w", Tensor<float>({4}, {0.1f, 0.2f, 0.3f, 0.4f}));
    AdamState<float> st;
    for (int s = 0; s < 5; ++s) {
      for (std::size_t i = 0; i < 4; ++i) p.grad[i] = std::sin(float(s + i));
      adam_step<float>({&p}, st, AdamConfig{});
    }
    return std::make_pair(p.value, st);
  };
  auto [v1, s1] = run();
  auto [v2, s2] = run();
  CHECK(v1 == v2);
  CHECK(s1 == s2);
}

TEST_CASE("forward passes are bit-identical across repeats") {
  std::mt19937_64 rng(8);
  auto x = tensor_cast<float>(randn({3, 8, 8, 2}, rng));
  auto w = tensor_cast<float>(randn({3, 3, 2, 4}, rng));
  auto run = [&] {
    Tape<float> t(false);
    auto y = gelu(conv2d(t.constant(x), t.constant(w), t.constant(Tensor<float>({4})), 2, 1));
    return y.value();
  };
  CHECK(run() == run());
}
