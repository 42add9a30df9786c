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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "scenenov/autodiff/tape.hpp"
#include "scenenov/errors.hpp"

namespace scenenov::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

namespace detail {

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
}

template <class Fn>
double eval_scalar(Fn& fn, std::vector<Tensor<double>>& inputs) {
  Tape<double> tape(false);
  std::vector<Var<double>> vars;
  vars.reserve(inputs.size());
  for (auto& x : inputs) vars.push_back(tape.constant(x));
  Var<double> out = fn(tape, vars);
  if (out.value().size() != 1) throw UsageError("grad_check: function output is not a scalar");
  return out.value()[0];
}

}  // namespace detail

// Compares reverse-mode gradients of a scalar program against central
// differences (f(x+eps) - f(x-eps)) / (2 eps). `fn` receives a tape and one
// Var per input and returns the scalar output.
template <class Fn>
GradCheckResult grad_check(Fn fn, std::vector<Tensor<double>> inputs, double eps = 1e-5) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape(true);
    std::vector<Var<double>> vars;
    for (auto& x : inputs) vars.push_back(tape.leaf(x));
    Var<double> out = fn(tape, vars);
    if (out.value().size() != 1) throw UsageError("grad_check: function output is not a scalar");
    tape.backward(out);
    for (auto& v : vars) analytic.push_back(tape.grad(v));
  }
  GradCheckResult res;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double orig = inputs[i][j];
      inputs[i][j] = orig + eps;
      const double fp = detail::eval_scalar(fn, inputs);
      inputs[i][j] = orig - eps;
      const double fm = detail::eval_scalar(fn, inputs);
      inputs[i][j] = orig;
      const double num = (fp - fm) / (2 * eps);
      const double e = detail::rel_error(analytic[i][j], num);
      if (e > res.max_rel_error) res = {e, i, j, analytic[i][j], num};
    }
  }
  return res;
}

// Same check over model parameters. `fn(tape)` must read the parameters via
// tape.param() and return the scalar output.
template <class Fn>
GradCheckResult grad_check_params(Fn fn, const std::vector<Parameter<double>*>& params,
                                  double eps = 1e-5) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape(true);
    Var<double> out = fn(tape);
    if (out.value().size() != 1) throw UsageError("grad_check: function output is not a scalar");
    tape.backward(out);
  }
  std::vector<Tensor<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  auto eval = [&] {
    Tape<double> tape(false);
    return fn(tape).value()[0];
  };
  GradCheckResult res;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = params[i]->value;
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double orig = v[j];
      v[j] = orig + eps;
      const double fp = eval();
      v[j] = orig - eps;
      const double fm = eval();
      v[j] = orig;
      const double num = (fp - fm) / (2 * eps);
      const double e = detail::rel_error(analytic[i][j], num);
      if (e > res.max_rel_error) res = {e, i, j, analytic[i][j], num};
    }
  }
  return res;
}

}  // namespace scenenov::ad
