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

#include "scenenov/autodiff/tape.hpp"

#include "scenenov/errors.hpp"
#include "scenenov/simd/kernels.hpp"

namespace scenenov::ad {

template <class T>
Var<T> Tape<T>::append(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  return append(std::move(n));
}

template <class T>
Var<T> Tape<T>::leaf(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  return append(std::move(n));
}

template <class T>
Var<T> Tape<T>::param(Parameter<T>& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = record_;
  return append(std::move(n));
}

template <class T>
Var<T> Tape<T>::push(const char* op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                     BackwardFn backward) {
  return push(op, std::move(value), std::vector<Var<T>>(inputs), std::move(backward));
}

template <class T>
Var<T> Tape<T>::push(const char* op, Tensor<T> value, const std::vector<Var<T>>& inputs,
                     BackwardFn backward) {
  if (!all_finite(value.data(), value.size())) {
    throw NumericError(std::string("non-finite value produced by ") + op + " (shape " +
                       shape_str(value.shape()) + ")");
  }
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const auto& in : inputs) {
      if (in.tape != this) throw UsageError(std::string(op) + ": operand from another tape");
      if (nodes_[in.id].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return append(std::move(n));
}

template <class T>
const Tensor<T>& Tape<T>::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

template <class T>
Tensor<T> Tape<T>::grad(Var<T> v) const {
  const Node& n = nodes_[v.id];
  if (!n.grad.empty()) return n.grad;
  return Tensor<T>(value(v.id).shape());
}

template <class T>
Tensor<T>& Tape<T>::grad_accumulator(std::uint32_t id) {
  Node& n = nodes_[id];
  const Tensor<T>& v = value(id);
  if (n.grad.size() != v.size() || n.grad.shape() != v.shape()) n.grad = Tensor<T>(v.shape());
  return n.grad;
}

template <class T>
void Tape<T>::backward(Var<T> root) {
  if (root.tape != this) throw UsageError("backward: root from another tape");
  if (value(root.id).size() != 1) {
    throw UsageError("backward: root must be a scalar, got shape " +
                     shape_str(value(root.id).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor<T>();
  if (!nodes_[root.id].requires_grad) return;
  grad_accumulator(root.id).fill(T(1));
  for (std::int64_t i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
    if (n.param != nullptr) {
      simd::kernels<T>().add(n.param->grad.data(), n.grad.data(), n.param->grad.data(),
                             n.grad.size());
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace scenenov::ad
