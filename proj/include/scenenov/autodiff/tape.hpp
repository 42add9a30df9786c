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

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>

#include "scenenov/autodiff/tensor.hpp"

namespace scenenov::ad {

template <class T>
class Tape;

// Handle to a value recorded on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
};

// A trainable tensor. Gradients from every tape that used it accumulate into
// `grad` until zero_grad().
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T(0)); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the reverse
// of insertion order is a valid topological order for backward().
//
// Single-threaded; one tape per forward/backward pass.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<T> constant(Tensor<T> value);
  // Differentiable input; its gradient is read back with grad().
  Var<T> leaf(Tensor<T> value);
  // Reads the parameter in place; backward() adds into p.grad.
  Var<T> param(Parameter<T>& p);

  // Records an op result. `backward` is dropped when nothing upstream needs a
  // gradient. Throws NumericError when the value holds NaN/Inf.
  Var<T> push(const char* op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
              BackwardFn backward);
  Var<T> push(const char* op, Tensor<T> value, const std::vector<Var<T>>& inputs,
              BackwardFn backward);

  const Tensor<T>& value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  // Gradient of the last backward() root with respect to v (zeros when v did
  // not influence it).
  Tensor<T> grad(Var<T> v) const;

  // Zero-initialized on first use; for backward implementations.
  Tensor<T>& grad_accumulator(std::uint32_t id);
  const Tensor<T>& grad_of(std::uint32_t id) const { return nodes_[id].grad; }

  // root must hold exactly one element.
  void backward(Var<T> root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  Var<T> append(Node node);

  std::deque<Node> nodes_;
  bool record_;
};

}  // namespace scenenov::ad
