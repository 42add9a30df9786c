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

#include "scenenov/autodiff/tensor.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>

#include "scenenov/errors.hpp"

namespace scenenov::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <class T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != numel(shape_)) {
    throw ShapeError("tensor of shape " + shape_str(shape_) + " given " +
                     std::to_string(data_.size()) + " values");
  }
}

template <class T>
T Tensor<T>::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

template <class T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

namespace {
template <class T, class Bits, Bits kExpMask>
bool finite_bits(const T* data, std::size_t n) {
  Bits bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Bits b;
    std::memcpy(&b, data + i, sizeof(T));
    bad |= static_cast<Bits>((b & kExpMask) == kExpMask);
  }
  return bad == 0;
}
}  // namespace

template <>
bool all_finite<float>(const float* data, std::size_t n) {
  return finite_bits<float, std::uint32_t, 0x7f800000u>(data, n);
}
template <>
bool all_finite<double>(const double* data, std::size_t n) {
  return finite_bits<double, std::uint64_t, 0x7ff0000000000000ull>(data, n);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace scenenov::ad
