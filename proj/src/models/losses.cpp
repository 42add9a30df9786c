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

#include "scenenov/errors.hpp"
#include "scenenov/models/models.hpp"

namespace scenenov::models {

double triplet_loss_from_distances(double d_ap, double d_an, double alpha) {
  return std::max(alpha + (d_ap - d_an), 0.0);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double triplet_loss(std::span<const double> z_a, std::span<const double> z_p, std::span<const double> z_n,
                    double alpha) {
  return triplet_loss_from_distances(squared_distance(z_a, z_p), squared_distance(z_a, z_n), alpha);
}

double recon_loss(std::span<const double> x, std::span<const double> x_hat) { return squared_distance(x, x_hat); }

double total_loss(double l_tri, double l_rec, double lambda_rec, bool use_triplet, bool use_decoder) {
  return (use_triplet ? l_tri : 0.0) + (use_decoder ? lambda_rec * l_rec : 0.0);
}

template <class T>
Var<T> triplet_loss(Var<T> z_a, Var<T> z_p, Var<T> z_n, T alpha) {
  Var<T> d_ap = ad::sum(ad::squared_difference(z_a, z_p), 1);
  Var<T> d_an = ad::sum(ad::squared_difference(z_a, z_n), 1);
  return ad::relu(ad::add_scalar(ad::sub(d_ap, d_an), alpha));
}

template <class T>
Var<T> recon_loss(Var<T> x, Var<T> x_hat) {
  const Shape& s = x.shape();
  if (s.empty()) throw ShapeError("recon_loss needs a batch dimension");
  const std::size_t n = s[0];
  Var<T> d = ad::squared_difference(x, x_hat);
  return ad::sum(ad::reshape(d, {n, d.value().size() / std::max<std::size_t>(n, 1)}), 1);
}

template Var<float> triplet_loss(Var<float>, Var<float>, Var<float>, float);
template Var<double> triplet_loss(Var<double>, Var<double>, Var<double>, double);
template Var<float> recon_loss(Var<float>, Var<float>);
template Var<double> recon_loss(Var<double>, Var<double>);

std::size_t select_negative(double d_ap, std::span<const double> d_an, double alpha) {
  if (d_an.empty()) throw ParameterError("select_negative: empty negative pool");
  constexpr std::size_t none = std::size_t(-1);
  std::size_t semi = none, hard = none, easy = none;
  for (std::size_t i = 0; i < d_an.size(); ++i) {
    const double d = d_an[i];
    if (d > d_ap && d < d_ap + alpha) {
      if (semi == none || d < d_an[semi]) semi = i;
    } else if (d <= d_ap) {
      if (hard == none || d > d_an[hard]) hard = i;
    } else if (easy == none || d < d_an[easy]) {
      easy = i;
    }
  }
  if (semi != none) return semi;
  return hard != none ? hard : easy;
}

}  // namespace scenenov::models
