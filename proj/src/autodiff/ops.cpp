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

#include "scenenov/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "scenenov/errors.hpp"
#include "scenenov/simd/kernels.hpp"

namespace scenenov::ad {
namespace {

template <class T>
const simd::KernelTable<T>& K() {
  return simd::kernels<T>();
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

// op(A) is m x k, op(B) is k x n; C (m x n) = op(A) op(B) + beta C.
template <class T>
void mm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b,
        T* c, T beta) {
  simd::GemmArgs<T> g;
  g.trans_a = ta;
  g.trans_b = tb;
  g.m = m;
  g.n = n;
  g.k = k;
  g.a = a;
  g.lda = ta ? m : k;
  g.b = b;
  g.ldb = tb ? k : n;
  g.c = c;
  g.ldc = n;
  g.beta = beta;
  simd::gemm(g);
}

// b broadcast over a's leading dims when b's shape is a suffix of a's.
bool is_suffix(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.begin(), b.end(), a.end() - static_cast<std::ptrdiff_t>(b.size()));
}

template <class T>
void accumulate(Tensor<T>& dst, const T* src) {
  K<T>().add(dst.data(), src, dst.data(), dst.size());
}

// dst[j] += sum over rows of src[row * inner + j]
template <class T>
void accumulate_rows(T* dst, const T* src, std::size_t outer, std::size_t inner) {
  for (std::size_t o = 0; o < outer; ++o) K<T>().add(dst, src + o * inner, dst, inner);
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// matmul / linear

template <class T>
Var<T> matmul(Var<T> a, Var<T> b, bool trans_a, bool trans_b) {
  Tape<T>& t = *a.tape;
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2) shape_mismatch("matmul", as, bs);
  const std::size_t m = trans_a ? as[as.size() - 1] : as[as.size() - 2];
  const std::size_t k = trans_a ? as[as.size() - 2] : as[as.size() - 1];
  const std::size_t kb = trans_b ? bs[bs.size() - 1] : bs[bs.size() - 2];
  const std::size_t n = trans_b ? bs[bs.size() - 2] : bs[bs.size() - 1];
  if (k != kb) shape_mismatch("matmul", as, bs);
  const bool shared_b = bs.size() == 2;
  if (!shared_b) {
    if (bs.size() != as.size() || !std::equal(as.begin(), as.end() - 2, bs.begin())) {
      shape_mismatch("matmul", as, bs);
    }
  }
  std::size_t batch = 1;
  for (std::size_t i = 0; i + 2 < as.size(); ++i) batch *= as[i];

  Shape os(as.begin(), as.end() - 2);
  os.push_back(m);
  os.push_back(n);
  Tensor<T> out(os);
  const T* A = a.value().data();
  const T* B = b.value().data();
  const bool collapse = shared_b && !trans_a;
  if (collapse) {
    mm(false, trans_b, batch * m, n, k, A, B, out.data(), T(0));
  } else {
    for (std::size_t i = 0; i < batch; ++i) {
      mm(trans_a, trans_b, m, n, k, A + i * m * k, shared_b ? B : B + i * k * n,
         out.data() + i * m * n, T(0));
    }
  }
  const auto ida = a.id, idb = b.id;
  return t.push("matmul", std::move(out), {a, b},
                [=](Tape<T>& tp, std::uint32_t self) {
                  const T* G = tp.grad_of(self).data();
                  const T* Av = tp.value(ida).data();
                  const T* Bv = tp.value(idb).data();
                  if (tp.requires_grad(ida)) {
                    T* dA = tp.grad_accumulator(ida).data();
                    if (collapse) {
                      mm(false, !trans_b, batch * m, k, n, G, Bv, dA, T(1));
                    } else {
                      for (std::size_t i = 0; i < batch; ++i) {
                        const T* Bi = shared_b ? Bv : Bv + i * k * n;
                        const T* Gi = G + i * m * n;
                        T* dAi = dA + i * m * k;
                        if (!trans_a) {
                          mm(false, !trans_b, m, k, n, Gi, Bi, dAi, T(1));
                        } else {
                          mm(trans_b, true, k, m, n, Bi, Gi, dAi, T(1));
                        }
                      }
                    }
                  }
                  if (tp.requires_grad(idb)) {
                    T* dB = tp.grad_accumulator(idb).data();
                    if (collapse) {
                      if (!trans_b) {
                        mm(true, false, k, n, batch * m, Av, G, dB, T(1));
                      } else {
                        mm(true, false, n, k, batch * m, G, Av, dB, T(1));
                      }
                    } else {
                      for (std::size_t i = 0; i < batch; ++i) {
                        const T* Ai = Av + i * m * k;
                        const T* Gi = G + i * m * n;
                        T* dBi = shared_b ? dB : dB + i * k * n;
                        if (!trans_b) {
                          mm(!trans_a, false, k, n, m, Ai, Gi, dBi, T(1));
                        } else {
                          mm(true, trans_a, n, k, m, Gi, Ai, dBi, T(1));
                        }
                      }
                    }
                  }
                });
}

template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias) {
  Tape<T>& t = *x.tape;
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.empty() || ws.size() != 2 || xs.back() != ws[0]) shape_mismatch("linear", xs, ws);
  if (bias.shape() != Shape{ws[1]}) shape_mismatch("linear(bias)", ws, bias.shape());
  const std::size_t in = ws[0], outd = ws[1];
  const std::size_t rows = x.value().size() / in;
  Shape os = xs;
  os.back() = outd;
  Tensor<T> out(os);
  const T* bv = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r) std::copy(bv, bv + outd, out.data() + r * outd);
  mm(false, false, rows, outd, in, x.value().data(), w.value().data(), out.data(), T(1));
  const auto idx = x.id, idw = w.id, idb = bias.id;
  return t.push("linear", std::move(out), {x, w, bias}, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    if (tp.requires_grad(idx)) {
      mm(false, true, rows, in, outd, G, tp.value(idw).data(), tp.grad_accumulator(idx).data(),
         T(1));
    }
    if (tp.requires_grad(idw)) {
      mm(true, false, in, outd, rows, tp.value(idx).data(), G, tp.grad_accumulator(idw).data(),
         T(1));
    }
    if (tp.requires_grad(idb)) accumulate_rows(tp.grad_accumulator(idb).data(), G, rows, outd);
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& t = *a.tape;
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (!is_suffix(as, bs)) shape_mismatch("add", as, bs);
  const std::size_t inner = b.value().size();
  const std::size_t outer = inner == 0 ? 0 : a.value().size() / inner;
  Tensor<T> out(as);
  for (std::size_t o = 0; o < outer; ++o) {
    K<T>().add(a.value().data() + o * inner, b.value().data(), out.data() + o * inner, inner);
  }
  const auto ida = a.id, idb = b.id;
  return t.push("add", std::move(out), {a, b}, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    if (tp.requires_grad(ida)) accumulate(tp.grad_accumulator(ida), G);
    if (tp.requires_grad(idb)) accumulate_rows(tp.grad_accumulator(idb).data(), G, outer, inner);
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& t = *a.tape;
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (!is_suffix(as, bs)) shape_mismatch("sub", as, bs);
  const std::size_t inner = b.value().size();
  const std::size_t outer = inner == 0 ? 0 : a.value().size() / inner;
  Tensor<T> out(as);
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) out[o * inner + j] = av[o * inner + j] - bv[j];
  }
  const auto ida = a.id, idb = b.id;
  return t.push("sub", std::move(out), {a, b}, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    if (tp.requires_grad(ida)) accumulate(tp.grad_accumulator(ida), G);
    if (tp.requires_grad(idb)) {
      T* d = tp.grad_accumulator(idb).data();
      for (std::size_t o = 0; o < outer; ++o) K<T>().axpy(T(-1), G + o * inner, d, inner);
    }
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& t = *a.tape;
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (!is_suffix(as, bs)) shape_mismatch("mul", as, bs);
  const std::size_t inner = b.value().size();
  const std::size_t outer = inner == 0 ? 0 : a.value().size() / inner;
  Tensor<T> out(as);
  for (std::size_t o = 0; o < outer; ++o) {
    K<T>().mul(a.value().data() + o * inner, b.value().data(), out.data() + o * inner, inner);
  }
  const auto ida = a.id, idb = b.id;
  return t.push("mul", std::move(out), {a, b}, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    const T* av = tp.value(ida).data();
    const T* bv = tp.value(idb).data();
    std::vector<T> tmp(inner);
    if (tp.requires_grad(ida)) {
      T* d = tp.grad_accumulator(ida).data();
      for (std::size_t o = 0; o < outer; ++o) {
        K<T>().mul(G + o * inner, bv, tmp.data(), inner);
        K<T>().add(d + o * inner, tmp.data(), d + o * inner, inner);
      }
    }
    if (tp.requires_grad(idb)) {
      T* d = tp.grad_accumulator(idb).data();
      for (std::size_t o = 0; o < outer; ++o) {
        K<T>().mul(G + o * inner, av + o * inner, tmp.data(), inner);
        K<T>().add(d, tmp.data(), d, inner);
      }
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T factor) {
  Tape<T>& t = *a.tape;
  Tensor<T> out(a.shape());
  K<T>().scale(factor, a.value().data(), out.data(), out.size());
  const auto ida = a.id;
  return t.push("scale", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    const auto& G = tp.grad_of(self);
    K<T>().axpy(factor, G.data(), tp.grad_accumulator(ida).data(), G.size());
  });
}

template <class T>
Var<T> add_scalar(Var<T> a, T c) {
  Tape<T>& t = *a.tape;
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v += c;
  const auto ida = a.id;
  return t.push("add_scalar", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    accumulate(tp.grad_accumulator(ida), tp.grad_of(self).data());
  });
}

template <class T>
Var<T> relu(Var<T> a) {
  Tape<T>& t = *a.tape;
  Tensor<T> out(a.shape());
  K<T>().relu(a.value().data(), out.data(), out.size());
  const auto ida = a.id;
  return t.push("relu", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    const auto& G = tp.grad_of(self);
    K<T>().relu_backward(tp.value(ida).data(), G.data(), tp.grad_accumulator(ida).data(),
                         G.size());
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

template <class T>
Var<T> gelu(Var<T> a) {
  Tape<T>& t = *a.tape;
  Tensor<T> out(a.shape());
  const T* x = a.value().data();
  // tanh(u) = 1 - 2 / (1 + e^{2u}); kept for the backward pass.
  auto th = std::make_shared<std::vector<T>>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T u = T(kGeluC) * (x[i] + T(kGeluA) * x[i] * x[i] * x[i]);
    (*th)[i] = T(1) - T(2) / (T(1) + std::exp(T(2) * u));
    out[i] = T(0.5) * x[i] * (T(1) + (*th)[i]);
  }
  const auto ida = a.id;
  return t.push("gelu", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    const auto& G = tp.grad_of(self);
    const T* xv = tp.value(ida).data();
    T* d = tp.grad_accumulator(ida).data();
    for (std::size_t i = 0; i < G.size(); ++i) {
      const T xi = xv[i];
      const T h = (*th)[i];
      const T du = T(kGeluC) * (T(1) + T(3 * kGeluA) * xi * xi);
      d[i] += G[i] * (T(0.5) * (T(1) + h) + T(0.5) * xi * (T(1) - h * h) * du);
    }
  });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  Tape<T>& t = *a.tape;
  Tensor<T> out(a.shape());
  const T* x = a.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (x[i] >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      out[i] = e / (T(1) + e);
    }
  }
  const auto ida = a.id;
  return t.push("sigmoid", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    const auto& G = tp.grad_of(self);
    const T* y = tp.value(self).data();
    T* d = tp.grad_accumulator(ida).data();
    for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * y[i] * (T(1) - y[i]);
  });
}

template <class T>
Var<T> squared_difference(Var<T> a, Var<T> b) {
  Tape<T>& t = *a.tape;
  if (a.shape() != b.shape()) shape_mismatch("squared_difference", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T d = av[i] - bv[i];
    out[i] = d * d;
  }
  const auto ida = a.id, idb = b.id;
  return t.push("squared_difference", std::move(out), {a, b},
                [=](Tape<T>& tp, std::uint32_t self) {
                  const auto& G = tp.grad_of(self);
                  const T* x = tp.value(ida).data();
                  const T* y = tp.value(idb).data();
                  if (tp.requires_grad(ida)) {
                    T* d = tp.grad_accumulator(ida).data();
                    for (std::size_t i = 0; i < G.size(); ++i) d[i] += T(2) * (x[i] - y[i]) * G[i];
                  }
                  if (tp.requires_grad(idb)) {
                    T* d = tp.grad_accumulator(idb).data();
                    for (std::size_t i = 0; i < G.size(); ++i) d[i] -= T(2) * (x[i] - y[i]) * G[i];
                  }
                });
}

// ---------------------------------------------------------------------------
// Normalizations

template <class T>
Var<T> softmax(Var<T> a) {
  Tape<T>& t = *a.tape;
  const Shape& s = a.shape();
  if (s.empty()) throw ShapeError("softmax of a scalar");
  const std::size_t len = s.back();
  const std::size_t rows = len == 0 ? 0 : a.value().size() / len;
  Tensor<T> out(s);
  const T* x = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * len;
    T* yr = out.data() + r * len;
    const T mx = *std::max_element(xr, xr + len);
    T z = 0;
    for (std::size_t j = 0; j < len; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    const T inv = T(1) / z;
    for (std::size_t j = 0; j < len; ++j) yr[j] *= inv;
  }
  const auto ida = a.id;
  return t.push("softmax", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    const T* y = tp.value(self).data();
    T* d = tp.grad_accumulator(ida).data();
    for (std::size_t r = 0; r < rows; ++r) {
      const T dotv = K<T>().dot(G + r * len, y + r * len, len);
      for (std::size_t j = 0; j < len; ++j) {
        d[r * len + j] += y[r * len + j] * (G[r * len + j] - dotv);
      }
    }
  });
}

template <class T>
Var<T> layernorm(Var<T> a, Var<T> gamma, Var<T> beta, T eps) {
  Tape<T>& t = *a.tape;
  const Shape& s = a.shape();
  if (s.empty()) throw ShapeError("layernorm of a scalar");
  const std::size_t len = s.back();
  if (gamma.shape() != Shape{len} || beta.shape() != Shape{len}) {
    shape_mismatch("layernorm", s, gamma.shape());
  }
  const std::size_t rows = len == 0 ? 0 : a.value().size() / len;
  auto rstd = std::make_shared<std::vector<T>>(rows);
  Tensor<T> out(s);
  const T* x = a.value().data();
  const T* gv = gamma.value().data();
  const T* bv = beta.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * len;
    T mu = 0;
    for (std::size_t j = 0; j < len; ++j) mu += xr[j];
    mu /= T(len);
    T var = 0;
    for (std::size_t j = 0; j < len; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= T(len);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    T* yr = out.data() + r * len;
    for (std::size_t j = 0; j < len; ++j) yr[j] = gv[j] * ((xr[j] - mu) * rs) + bv[j];
  }
  const auto ida = a.id, idg = gamma.id, idb = beta.id;
  return t.push("layernorm", std::move(out), {a, gamma, beta},
                [=](Tape<T>& tp, std::uint32_t self) {
                  const T* G = tp.grad_of(self).data();
                  const T* xv = tp.value(ida).data();
                  const T* gmv = tp.value(idg).data();
                  T* dx = tp.requires_grad(ida) ? tp.grad_accumulator(ida).data() : nullptr;
                  T* dg = tp.requires_grad(idg) ? tp.grad_accumulator(idg).data() : nullptr;
                  T* db = tp.requires_grad(idb) ? tp.grad_accumulator(idb).data() : nullptr;
                  std::vector<T> xhat(len), dxhat(len);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const T* xr = xv + r * len;
                    const T* gr = G + r * len;
                    T mu = 0;
                    for (std::size_t j = 0; j < len; ++j) mu += xr[j];
                    mu /= T(len);
                    const T rs = (*rstd)[r];
                    T mean_d = 0, mean_dx = 0;
                    for (std::size_t j = 0; j < len; ++j) {
                      xhat[j] = (xr[j] - mu) * rs;
                      dxhat[j] = gr[j] * gmv[j];
                      mean_d += dxhat[j];
                      mean_dx += dxhat[j] * xhat[j];
                      if (dg) dg[j] += gr[j] * xhat[j];
                      if (db) db[j] += gr[j];
                    }
                    mean_d /= T(len);
                    mean_dx /= T(len);
                    if (dx) {
                      T* dr = dx + r * len;
                      for (std::size_t j = 0; j < len; ++j) {
                        dr[j] += rs * (dxhat[j] - mean_d - xhat[j] * mean_dx);
                      }
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
Var<T> sum(Var<T> a) {
  Tape<T>& t = *a.tape;
  const T s = K<T>().sum(a.value().data(), a.value().size());
  const auto ida = a.id;
  return t.push("sum", Tensor<T>::scalar(s), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    const T g = tp.grad_of(self)[0];
    auto& d = tp.grad_accumulator(ida);
    for (auto& v : d.values()) v += g;
  });
}

template <class T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), T(1) / T(n));
}

template <class T>
Var<T> sum(Var<T> a, std::size_t axis) {
  Tape<T>& t = *a.tape;
  const Shape& s = a.shape();
  if (axis >= s.size()) throw ShapeError("sum: axis out of range for " + shape_str(s));
  const AxisSplit sp = split_axis(s, axis);
  Shape os = s;
  os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor<T> out(os);
  const T* x = a.value().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    T* dst = out.data() + o * sp.inner;
    for (std::size_t l = 0; l < sp.len; ++l) {
      K<T>().add(dst, x + (o * sp.len + l) * sp.inner, dst, sp.inner);
    }
  }
  const auto ida = a.id;
  return t.push("sum_axis", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    T* d = tp.grad_accumulator(ida).data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t l = 0; l < sp.len; ++l) {
        T* dr = d + (o * sp.len + l) * sp.inner;
        K<T>().add(dr, G + o * sp.inner, dr, sp.inner);
      }
    }
  });
}

template <class T>
Var<T> mean(Var<T> a, std::size_t axis) {
  if (axis >= a.shape().size()) throw ShapeError("mean: axis out of range");
  const std::size_t len = a.shape()[axis];
  if (len == 0) throw ShapeError("mean over an empty axis");
  return scale(sum(a, axis), T(1) / T(len));
}

// ---------------------------------------------------------------------------
// Layout

template <class T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tape<T>& t = *a.tape;
  Tensor<T> out = a.value().reshaped(std::move(shape));
  const auto ida = a.id;
  return t.push("reshape", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    accumulate(tp.grad_accumulator(ida), tp.grad_of(self).data());
  });
}

namespace {

// Copies src (shape s) into dst permuted by perm; if accumulate, adds.
template <class T>
void permute_copy(const T* src, const Shape& s, const std::vector<std::size_t>& perm, T* dst,
                  bool add_into) {
  const std::size_t r = s.size();
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * s[i];
  Shape os(r);
  std::vector<std::size_t> step(r);
  for (std::size_t i = 0; i < r; ++i) {
    os[i] = s[perm[i]];
    step[i] = in_stride[perm[i]];
  }
  const std::size_t n = numel(s);
  if (n == 0) return;
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  // Innermost output dim runs contiguous in dst.
  const std::size_t last = r - 1;
  for (std::size_t o = 0; o < n; o += os[last]) {
    const std::size_t st = step[last];
    if (add_into) {
      for (std::size_t j = 0; j < os[last]; ++j) dst[o + j] += src[off + j * st];
    } else {
      for (std::size_t j = 0; j < os[last]; ++j) dst[o + j] = src[off + j * st];
    }
    for (std::size_t d = last; d-- > 0;) {
      ++idx[d];
      off += step[d];
      if (idx[d] < os[d]) break;
      off -= step[d] * os[d];
      idx[d] = 0;
    }
  }
}

}  // namespace

template <class T>
Var<T> permute(Var<T> a, const std::vector<std::size_t>& perm) {
  Tape<T>& t = *a.tape;
  const Shape& s = a.shape();
  if (perm.size() != s.size() || s.empty()) throw ShapeError("permute: rank mismatch for " + shape_str(s));
  std::vector<std::size_t> inv(perm.size(), perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= perm.size() || inv[perm[i]] != perm.size()) {
      throw ShapeError("permute: invalid permutation");
    }
    inv[perm[i]] = i;
  }
  Shape os(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) os[i] = s[perm[i]];
  Tensor<T> out(os);
  permute_copy(a.value().data(), s, perm, out.data(), false);
  const auto ida = a.id;
  return t.push("permute", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    permute_copy(tp.grad_of(self).data(), os, inv, tp.grad_accumulator(ida).data(), true);
  });
}

template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Tape<T>& t = *parts[0].tape;
  Shape os = parts[0].shape();
  if (axis >= os.size()) throw ShapeError("concat: axis out of range");
  os[axis] = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    if (ps.size() != os.size()) shape_mismatch("concat", parts[0].shape(), ps);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (i != axis && ps[i] != parts[0].shape()[i]) shape_mismatch("concat", parts[0].shape(), ps);
    }
    os[axis] += ps[axis];
  }
  const AxisSplit sp = split_axis(os, axis);
  std::vector<std::size_t> lens;
  for (const auto& p : parts) lens.push_back(p.shape()[axis]);
  Tensor<T> out(os);
  std::size_t at = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const T* src = parts[pi].value().data();
    const std::size_t chunk = lens[pi] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy(src + o * chunk, src + (o + 1) * chunk, out.data() + o * sp.len * sp.inner + at);
    }
    at += chunk;
  }
  std::vector<std::uint32_t> ids;
  for (const auto& p : parts) ids.push_back(p.id);
  return t.push("concat", std::move(out), parts, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    std::size_t at2 = 0;
    for (std::size_t pi = 0; pi < ids.size(); ++pi) {
      const std::size_t chunk = lens[pi] * sp.inner;
      if (tp.requires_grad(ids[pi])) {
        T* d = tp.grad_accumulator(ids[pi]).data();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          K<T>().add(d + o * chunk, G + o * sp.len * sp.inner + at2, d + o * chunk, chunk);
        }
      }
      at2 += chunk;
    }
  });
}

template <class T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape<T>& t = *a.tape;
  const Shape& s = a.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " of " + shape_str(s));
  }
  const AxisSplit sp = split_axis(s, axis);
  Shape os = s;
  os[axis] = end - begin;
  const std::size_t chunk = (end - begin) * sp.inner;
  Tensor<T> out(os);
  const T* x = a.value().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const T* src = x + (o * sp.len + begin) * sp.inner;
    std::copy(src, src + chunk, out.data() + o * chunk);
  }
  const auto ida = a.id;
  return t.push("slice", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    T* d = tp.grad_accumulator(ida).data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      T* dst = d + (o * sp.len + begin) * sp.inner;
      K<T>().add(dst, G + o * chunk, dst, chunk);
    }
  });
}

template <class T>
Var<T> repeat_leading(Var<T> a, std::size_t n) {
  Tape<T>& t = *a.tape;
  Shape os = a.shape();
  os.insert(os.begin(), n);
  const std::size_t inner = a.value().size();
  Tensor<T> out(os);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(a.value().data(), a.value().data() + inner, out.data() + i * inner);
  }
  const auto ida = a.id;
  return t.push("repeat_leading", std::move(out), {a}, [=](Tape<T>& tp, std::uint32_t self) {
    accumulate_rows(tp.grad_accumulator(ida).data(), tp.grad_of(self).data(), n, inner);
  });
}

// ---------------------------------------------------------------------------
// Convolution (NHWC, im2col + GEMM)

namespace {

struct ConvGeom {
  std::size_t n, h, w, ci, kh, kw, co, stride, pad, ho, wo;
  std::size_t kdim() const { return kh * kw * ci; }
  std::size_t rows() const { return n * ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Fills rows [r0, r1) of the im2col matrix into col (row-major, kdim wide).
template <class T>
void im2col(const T* x, const ConvGeom& g, std::size_t r0, std::size_t r1, T* col) {
  const std::size_t kd = g.kdim();
  for (std::size_t r = r0; r < r1; ++r) {
    const std::size_t img = r / (g.ho * g.wo);
    const std::size_t rem = r % (g.ho * g.wo);
    const std::size_t oy = rem / g.wo, ox = rem % g.wo;
    T* dst = col + (r - r0) * kd;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + dy) -
                                static_cast<std::ptrdiff_t>(g.pad);
      for (std::size_t dx = 0; dx < g.kw; ++dx) {
        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + dx) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        T* d = dst + (dy * g.kw + dx) * g.ci;
        if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.h) ||
            ix >= static_cast<std::ptrdiff_t>(g.w)) {
          std::fill(d, d + g.ci, T(0));
        } else {
          const T* s = x + ((img * g.h + static_cast<std::size_t>(iy)) * g.w +
                            static_cast<std::size_t>(ix)) * g.ci;
          std::copy(s, s + g.ci, d);
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, const ConvGeom& g, std::size_t r0, std::size_t r1, T* dx) {
  const std::size_t kd = g.kdim();
  for (std::size_t r = r0; r < r1; ++r) {
    const std::size_t img = r / (g.ho * g.wo);
    const std::size_t rem = r % (g.ho * g.wo);
    const std::size_t oy = rem / g.wo, ox = rem % g.wo;
    const T* src = col + (r - r0) * kd;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + dy) -
                                static_cast<std::ptrdiff_t>(g.pad);
      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
      for (std::size_t dxo = 0; dxo < g.kw; ++dxo) {
        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + dxo) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
        T* d = dx + ((img * g.h + static_cast<std::size_t>(iy)) * g.w +
                     static_cast<std::size_t>(ix)) * g.ci;
        K<T>().add(d, src + (dy * g.kw + dxo) * g.ci, d, g.ci);
      }
    }
  }
}

// Rows of the im2col matrix processed per GEMM call; bounds scratch memory.
constexpr std::size_t kConvRowBlock = 4096;

}  // namespace

template <class T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> bias, std::size_t stride, std::size_t pad) {
  Tape<T>& t = *x.tape;
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[3] != ws[2]) shape_mismatch("conv2d", xs, ws);
  if (bias.shape() != Shape{ws[3]}) shape_mismatch("conv2d(bias)", ws, bias.shape());
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[1], ws[3], stride, pad, 0, 0};
  if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw) shape_mismatch("conv2d", xs, ws);
  g.ho = (g.h + 2 * pad - g.kh) / stride + 1;
  g.wo = (g.w + 2 * pad - g.kw) / stride + 1;
  Tensor<T> out(Shape{g.n, g.ho, g.wo, g.co});
  const T* xv = x.value().data();
  const T* wv = w.value().data();
  const T* bv = bias.value().data();
  const std::size_t kd = g.kdim();
  const std::size_t rows = g.rows();
  for (std::size_t r = 0; r < rows; ++r) std::copy(bv, bv + g.co, out.data() + r * g.co);
  if (g.pointwise()) {
    mm(false, false, rows, g.co, kd, xv, wv, out.data(), T(1));
  } else {
    std::vector<T> col(std::min(rows, kConvRowBlock) * kd);
    for (std::size_t r0 = 0; r0 < rows; r0 += kConvRowBlock) {
      const std::size_t r1 = std::min(rows, r0 + kConvRowBlock);
      im2col(xv, g, r0, r1, col.data());
      mm(false, false, r1 - r0, g.co, kd, col.data(), wv, out.data() + r0 * g.co, T(1));
    }
  }
  const auto idx = x.id, idw = w.id, idb = bias.id;
  return t.push("conv2d", std::move(out), {x, w, bias}, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    const T* xv2 = tp.value(idx).data();
    const T* wv2 = tp.value(idw).data();
    const bool gx = tp.requires_grad(idx), gw = tp.requires_grad(idw);
    if (tp.requires_grad(idb)) accumulate_rows(tp.grad_accumulator(idb).data(), G, rows, g.co);
    if (g.pointwise()) {
      if (gw) mm(true, false, kd, g.co, rows, xv2, G, tp.grad_accumulator(idw).data(), T(1));
      if (gx) mm(false, true, rows, kd, g.co, G, wv2, tp.grad_accumulator(idx).data(), T(1));
      return;
    }
    T* dw = gw ? tp.grad_accumulator(idw).data() : nullptr;
    T* dx = gx ? tp.grad_accumulator(idx).data() : nullptr;
    const std::size_t blk = std::min(rows, kConvRowBlock);
    std::vector<T> col(blk * kd), dcol(gx ? blk * kd : 0);
    for (std::size_t r0 = 0; r0 < rows; r0 += kConvRowBlock) {
      const std::size_t r1 = std::min(rows, r0 + kConvRowBlock);
      const T* Gb = G + r0 * g.co;
      if (dw) {
        im2col(xv2, g, r0, r1, col.data());
        mm(true, false, kd, g.co, r1 - r0, col.data(), Gb, dw, T(1));
      }
      if (dx) {
        mm(false, true, r1 - r0, kd, g.co, Gb, wv2, dcol.data(), T(0));
        col2im_add(dcol.data(), g, r0, r1, dx);
      }
    }
  });
}

template <class T>
Var<T> upsample_nearest2x(Var<T> x) {
  Tape<T>& t = *x.tape;
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("upsample_nearest2x expects NHWC, got " + shape_str(s));
  const std::size_t n = s[0], h = s[1], w = s[2], c = s[3];
  Tensor<T> out(Shape{n, 2 * h, 2 * w, c});
  const T* xv = x.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t xx = 0; xx < 2 * w; ++xx) {
        const T* src = xv + ((i * h + y / 2) * w + xx / 2) * c;
        std::copy(src, src + c, out.data() + ((i * 2 * h + y) * 2 * w + xx) * c);
      }
    }
  }
  const auto idx = x.id;
  return t.push("upsample_nearest2x", std::move(out), {x}, [=](Tape<T>& tp, std::uint32_t self) {
    const T* G = tp.grad_of(self).data();
    T* d = tp.grad_accumulator(idx).data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t y = 0; y < 2 * h; ++y) {
        for (std::size_t xx = 0; xx < 2 * w; ++xx) {
          T* dst = d + ((i * h + y / 2) * w + xx / 2) * c;
          K<T>().add(dst, G + ((i * 2 * h + y) * 2 * w + xx) * c, dst, c);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------

#define SCENENOV_INSTANTIATE_OPS(T)                                                   \
  template Var<T> matmul<T>(Var<T>, Var<T>, bool, bool);                              \
  template Var<T> linear<T>(Var<T>, Var<T>, Var<T>);                                  \
  template Var<T> add<T>(Var<T>, Var<T>);                                             \
  template Var<T> sub<T>(Var<T>, Var<T>);                                             \
  template Var<T> mul<T>(Var<T>, Var<T>);                                             \
  template Var<T> scale<T>(Var<T>, T);                                                \
  template Var<T> add_scalar<T>(Var<T>, T);                                           \
  template Var<T> relu<T>(Var<T>);                                                    \
  template Var<T> gelu<T>(Var<T>);                                                    \
  template Var<T> sigmoid<T>(Var<T>);                                                 \
  template Var<T> softmax<T>(Var<T>);                                                 \
  template Var<T> layernorm<T>(Var<T>, Var<T>, Var<T>, T);                            \
  template Var<T> sum<T>(Var<T>);                                                     \
  template Var<T> mean<T>(Var<T>);                                                    \
  template Var<T> sum<T>(Var<T>, std::size_t);                                        \
  template Var<T> mean<T>(Var<T>, std::size_t);                                       \
  template Var<T> reshape<T>(Var<T>, Shape);                                          \
  template Var<T> permute<T>(Var<T>, const std::vector<std::size_t>&);                \
  template Var<T> concat<T>(const std::vector<Var<T>>&, std::size_t);                 \
  template Var<T> slice<T>(Var<T>, std::size_t, std::size_t, std::size_t);            \
  template Var<T> repeat_leading<T>(Var<T>, std::size_t);                             \
  template Var<T> squared_difference<T>(Var<T>, Var<T>);                              \
  template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t);        \
  template Var<T> upsample_nearest2x<T>(Var<T>);

SCENENOV_INSTANTIATE_OPS(float)
SCENENOV_INSTANTIATE_OPS(double)

}  // namespace scenenov::ad
