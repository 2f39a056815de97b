// Copyright 2026 The bnlu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differentiable operations over Tape values. Each op computes its forward
// value eagerly and records a closure that pushes the upstream gradient into
// its inputs. Only the operations the model needs are provided; there is no
// general broadcasting.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "bnlu/error.hpp"
#include "bnlu/rng.hpp"
#include "bnlu/tape.hpp"

namespace bnlu {

enum class Mode { train, eval };

// Floor applied to probabilities inside log-likelihood losses.
inline constexpr double kProbFloor = 1e-12;

namespace detail {

template <typename T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
  check(a.valid() && b.valid(), Errc::usage, "invalid Var");
  check(a.tape == b.tape, Errc::usage, "operands recorded on different tapes");
  return *a.tape;
}

inline std::size_t leading(const Shape& dims) {
  return dims.empty() ? 1 : numel(dims) / dims.back();
}

}  // namespace detail

/// Index of the largest entry; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> x) {
  detail::check(!x.empty(), Errc::usage, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

// y = x . W^T + b over the trailing dimension of x. Pass an invalid Var for b
// to omit the bias.
template <typename T>
Var<T> affine(Var<T> x, Var<T> w, Var<T> b = {}) {
  auto& tape = detail::same_tape(x, w);
  const Shape xd = x.dims();
  detail::check(w.rank() == 2, Errc::shape, "affine: weight must be rank 2, got ", to_string(w.dims()));
  const std::size_t din = w.dim(1), dout = w.dim(0);
  detail::check(!xd.empty() && xd.back() == din, Errc::shape, "affine: input ", to_string(xd),
                " does not match weight ", to_string(w.dims()));
  const bool has_bias = b.valid();
  if (has_bias) {
    detail::same_tape(x, b);
    detail::check(b.numel() == dout, Errc::shape, "affine: bias ", to_string(b.dims()), " expected [", dout, "]");
  }
  const std::size_t rows = detail::leading(xd);
  auto xv = x.value(), wv = w.value();
  auto bv = has_bias ? b.value() : std::span<const T>{};
  std::vector<T> y(rows * dout);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * din;
    for (std::size_t o = 0; o < dout; ++o) {
      const T* wo = wv.data() + o * din;
      T acc = has_bias ? bv[o] : T{0};
      for (std::size_t i = 0; i < din; ++i) acc += xr[i] * wo[i];
      y[r * dout + o] = acc;
    }
  }
  Shape yd = xd;
  yd.back() = dout;
  const int xi = x.id, wi = w.id, bi = b.id;
  std::vector<int> inputs{xi, wi};
  if (has_bias) inputs.push_back(bi);
  return tape.record(std::move(yd), std::move(y), inputs, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    auto xv = t.value(xi), wv = t.value(wi);
    T* gx = t.grad_buffer(xi);
    T* gw = t.grad_buffer(wi);
    T* gb = has_bias ? t.grad_buffer(bi) : nullptr;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < dout; ++o) {
        const T g = gy[r * dout + o];
        if (g == T{0}) continue;
        if (gx != nullptr)
          for (std::size_t i = 0; i < din; ++i) gx[r * din + i] += g * wv[o * din + i];
        if (gw != nullptr)
          for (std::size_t i = 0; i < din; ++i) gw[o * din + i] += g * xv[r * din + i];
        if (gb != nullptr) gb[o] += g;
      }
    }
  });
}

// Row r of x goes through its own dense layer W[p], b[p] with p = r, or p = 0
// for every row when the weights are shared (leading dim 1).
template <typename T>
Var<T> position_affine(Var<T> x, Var<T> w, Var<T> b) {
  auto& tape = detail::same_tape(x, w);
  detail::same_tape(x, b);
  detail::check(x.rank() == 2 && w.rank() == 3 && b.rank() == 2, Errc::shape,
                "position_affine: expected x[R,Din], W[P,Dout,Din], b[P,Dout]; got ", to_string(x.dims()), ", ",
                to_string(w.dims()), ", ", to_string(b.dims()));
  const std::size_t rows = x.dim(0), din = x.dim(1);
  const std::size_t positions = w.dim(0), dout = w.dim(1);
  detail::check(w.dim(2) == din, Errc::shape, "position_affine: weight input dim ", w.dim(2), " != ", din);
  detail::check(positions == rows || positions == 1, Errc::shape, "position_affine: ", positions,
                " weight matrices for ", rows, " rows");
  detail::check(b.dim(0) == positions && b.dim(1) == dout, Errc::shape, "position_affine: bias ",
                to_string(b.dims()));
  auto xv = x.value(), wv = w.value(), bv = b.value();
  std::vector<T> y(rows * dout);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t p = positions == 1 ? 0 : r;
    const T* xr = xv.data() + r * din;
    for (std::size_t o = 0; o < dout; ++o) {
      const T* wo = wv.data() + (p * dout + o) * din;
      T acc = bv[p * dout + o];
      for (std::size_t i = 0; i < din; ++i) acc += xr[i] * wo[i];
      y[r * dout + o] = acc;
    }
  }
  const int xi = x.id, wi = w.id, bi = b.id;
  return tape.record({rows, dout}, std::move(y), {xi, wi, bi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    auto xv = t.value(xi), wv = t.value(wi);
    T* gx = t.grad_buffer(xi);
    T* gw = t.grad_buffer(wi);
    T* gb = t.grad_buffer(bi);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t p = positions == 1 ? 0 : r;
      for (std::size_t o = 0; o < dout; ++o) {
        const T g = gy[r * dout + o];
        if (g == T{0}) continue;
        const std::size_t wrow = (p * dout + o) * din;
        if (gx != nullptr)
          for (std::size_t i = 0; i < din; ++i) gx[r * din + i] += g * wv[wrow + i];
        if (gw != nullptr)
          for (std::size_t i = 0; i < din; ++i) gw[wrow + i] += g * xv[r * din + i];
        if (gb != nullptr) gb[p * dout + o] += g;
      }
    }
  });
}

// [M,K] x [K,N] -> [M,N]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& tape = detail::same_tape(a, b);
  detail::check(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), Errc::shape, "matmul: ",
                to_string(a.dims()), " x ", to_string(b.dims()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto av = a.value(), bv = b.value();
  std::vector<T> y(m * n, T{0});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] += aip * bv[p * n + j];
    }
  const int ai = a.id, bi = b.id;
  return tape.record({m, n}, std::move(y), {ai, bi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    auto av = t.value(ai), bv = t.value(bi);
    T* ga = t.grad_buffer(ai);
    T* gb = t.grad_buffer(bi);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        T acc = T{0};
        for (std::size_t j = 0; j < n; ++j) {
          const T g = gy[i * n + j];
          acc += g * bv[p * n + j];
          if (gb != nullptr) gb[p * n + j] += av[i * k + p] * g;
        }
        if (ga != nullptr) ga[i * k + p] += acc;
      }
  });
}

// [M,K] x [N,K]^T -> [M,N]
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  auto& tape = detail::same_tape(a, b);
  detail::check(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1), Errc::shape, "matmul_nt: ",
                to_string(a.dims()), " x ", to_string(b.dims()), "^T");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  auto av = a.value(), bv = b.value();
  std::vector<T> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = T{0};
      for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * bv[j * k + p];
      y[i * n + j] = acc;
    }
  const int ai = a.id, bi = b.id;
  return tape.record({m, n}, std::move(y), {ai, bi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    auto av = t.value(ai), bv = t.value(bi);
    T* ga = t.grad_buffer(ai);
    T* gb = t.grad_buffer(bi);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const T g = gy[i * n + j];
        if (g == T{0}) continue;
        for (std::size_t p = 0; p < k; ++p) {
          if (ga != nullptr) ga[i * k + p] += g * bv[j * k + p];
          if (gb != nullptr) gb[j * k + p] += g * av[i * k + p];
        }
      }
  });
}

namespace detail {

template <typename T, typename F, typename G>
Var<T> binary_elementwise(Var<T> a, Var<T> b, const char* name, F f, G dfa_dfb) {
  auto& tape = same_tape(a, b);
  check(a.dims() == b.dims(), Errc::shape, name, ": shape mismatch ", to_string(a.dims()), " vs ",
        to_string(b.dims()));
  auto av = a.value(), bv = b.value();
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(av[i], bv[i]);
  const int ai = a.id, bi = b.id;
  return tape.record(a.dims(), std::move(y), {ai, bi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    auto av = t.value(ai), bv = t.value(bi);
    T* ga = t.grad_buffer(ai);
    T* gb = t.grad_buffer(bi);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      auto [da, db] = dfa_dfb(av[i], bv[i]);
      if (ga != nullptr) ga[i] += gy[i] * da;
      if (gb != nullptr) gb[i] += gy[i] * db;
    }
  });
}

// dy/dx expressed through the input x and output y.
template <typename T, typename F, typename D>
Var<T> unary_elementwise(Var<T> x, F f, D deriv) {
  check(x.valid(), Errc::usage, "invalid Var");
  auto xv = x.value();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  const int xi = x.id;
  return x.tape->record(x.dims(), std::move(y), {xi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    auto xv = t.value(xi), yv = t.value(self);
    T* gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace detail

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  return detail::binary_elementwise(a, b, "add", [](T x, T y) { return x + y; },
                                    [](T, T) { return std::pair<T, T>{T{1}, T{1}}; });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  return detail::binary_elementwise(a, b, "sub", [](T x, T y) { return x - y; },
                                    [](T, T) { return std::pair<T, T>{T{1}, T{-1}}; });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  return detail::binary_elementwise(a, b, "mul", [](T x, T y) { return x * y; },
                                    [](T x, T y) { return std::pair<T, T>{y, x}; });
}

template <typename T>
Var<T> scale(Var<T> x, T c) {
  return detail::unary_elementwise(x, [c](T v) { return c * v; }, [c](T, T) { return c; });
}

template <typename T>
Var<T> one_minus(Var<T> x) {
  return detail::unary_elementwise(x, [](T v) { return T{1} - v; }, [](T, T) { return T{-1}; });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  return detail::unary_elementwise(
      x, [](T v) { return T{1} / (T{1} + std::exp(-v)); }, [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  return detail::unary_elementwise(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

// Exact (erf) GELU.
template <typename T>
Var<T> gelu(Var<T> x) {
  constexpr T inv_sqrt2 = T(0.70710678118654752440L);
  constexpr T inv_sqrt2pi = T(0.39894228040143267794L);
  return detail::unary_elementwise(
      x, [](T v) { return T(0.5) * v * (T{1} + std::erf(v * inv_sqrt2)); },
      [](T v, T) { return T(0.5) * (T{1} + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v); });
}

// Softmax over the last dimension with max subtraction.
template <typename T>
Var<T> softmax(Var<T> x) {
  detail::check(x.valid() && x.rank() >= 1, Errc::usage, "softmax: invalid input");
  const std::size_t k = x.dims().back();
  const std::size_t rows = detail::leading(x.dims());
  auto xv = x.value();
  std::vector<T> y(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * k;
    T mx = xr[0];
    for (std::size_t i = 0; i < k; ++i) {
      detail::check(std::isfinite(xr[i]), Errc::numeric, "softmax: non-finite input");
      mx = std::max(mx, xr[i]);
    }
    T sum = T{0};
    for (std::size_t i = 0; i < k; ++i) sum += (y[r * k + i] = std::exp(xr[i] - mx));
    for (std::size_t i = 0; i < k; ++i) y[r * k + i] /= sum;
  }
  const int xi = x.id;
  return x.tape->record(x.dims(), std::move(y), {xi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    auto yv = t.value(self);
    T* gx = t.grad_buffer(xi);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = T{0};
      for (std::size_t i = 0; i < k; ++i) dot += gy[r * k + i] * yv[r * k + i];
      for (std::size_t i = 0; i < k; ++i) gx[r * k + i] += yv[r * k + i] * (gy[r * k + i] - dot);
    }
  });
}

// Normalizes each row of x[R,D] then applies gamma/beta.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-12)) {
  auto& tape = detail::same_tape(x, gamma);
  detail::same_tape(x, beta);
  const std::size_t d = x.dims().back();
  detail::check(gamma.numel() == d && beta.numel() == d, Errc::shape, "layer_norm: gamma/beta size != ", d);
  const std::size_t rows = detail::leading(x.dims());
  auto xv = x.value(), gv = gamma.value(), bv = beta.value();
  std::vector<T> xhat(xv.size()), rstd(rows), y(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    T mean = T{0};
    for (std::size_t i = 0; i < d; ++i) mean += xv[r * d + i];
    mean /= T(d);
    T var = T{0};
    for (std::size_t i = 0; i < d; ++i) {
      const T c = xv[r * d + i] - mean;
      var += c * c;
    }
    var /= T(d);
    rstd[r] = T{1} / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) {
      xhat[r * d + i] = (xv[r * d + i] - mean) * rstd[r];
      y[r * d + i] = gv[i] * xhat[r * d + i] + bv[i];
    }
  }
  const int xi = x.id, gi = gamma.id, bi = beta.id;
  return tape.record(x.dims(), std::move(y), {xi, gi, bi},
                     [=, xhat = std::move(xhat), rstd = std::move(rstd)](Tape<T>& t, int self) {
                       auto gy = t.grad(self);
                       auto gv = t.value(gi);
                       T* gx = t.grad_buffer(xi);
                       T* gg = t.grad_buffer(gi);
                       T* gb = t.grad_buffer(bi);
                       for (std::size_t r = 0; r < rows; ++r) {
                         T mean_g = T{0}, mean_gx = T{0};
                         for (std::size_t i = 0; i < d; ++i) {
                           const T g = gy[r * d + i];
                           const T gh = g * gv[i];
                           mean_g += gh;
                           mean_gx += gh * xhat[r * d + i];
                           if (gg != nullptr) gg[i] += g * xhat[r * d + i];
                           if (gb != nullptr) gb[i] += g;
                         }
                         if (gx == nullptr) continue;
                         mean_g /= T(d);
                         mean_gx /= T(d);
                         for (std::size_t i = 0; i < d; ++i) {
                           const T gh = gy[r * d + i] * gv[i];
                           gx[r * d + i] += rstd[r] * (gh - mean_g - xhat[r * d + i] * mean_gx);
                         }
                       }
                     });
}

// Inverted dropout: survivors are scaled by 1/(1-p) so eval mode is the
// identity (and returns x itself).
template <typename T>
Var<T> dropout(Var<T> x, double p, Mode mode, Rng* rng) {
  detail::check(p >= 0.0 && p < 1.0, Errc::config, "dropout probability must be in [0,1), got ", p);
  if (mode == Mode::eval || p == 0.0) return x;
  detail::check(rng != nullptr, Errc::usage, "dropout in train mode needs an Rng");
  const T keep_scale = T(1.0 / (1.0 - p));
  auto xv = x.value();
  std::vector<T> mask(xv.size()), y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask[i] = rng->uniform() < p ? T{0} : keep_scale;
    y[i] = xv[i] * mask[i];
  }
  const int xi = x.id;
  return x.tape->record(x.dims(), std::move(y), {xi}, [=, mask = std::move(mask)](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    T* gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * mask[i];
  });
}

// Embedding lookup: row ids[i] of table[V,D] -> output row i.
template <typename T>
Var<T> gather_rows(Var<T> table, std::span<const int> ids) {
  detail::check(table.valid() && table.rank() == 2, Errc::shape, "gather_rows: table must be rank 2");
  const std::size_t v = table.dim(0), d = table.dim(1);
  detail::check(!ids.empty(), Errc::usage, "gather_rows: no ids");
  auto tv = table.value();
  std::vector<T> y(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    detail::check(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < v, Errc::data, "gather_rows: id ", ids[i],
                  " out of range for table of ", v, " rows");
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, y.data() + i * d);
  }
  const int ti = table.id;
  std::vector<int> idv(ids.begin(), ids.end());
  return table.tape->record({ids.size(), d}, std::move(y), {ti}, [=, idv = std::move(idv)](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    T* gt = t.grad_buffer(ti);
    for (std::size_t i = 0; i < idv.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) gt[static_cast<std::size_t>(idv[i]) * d + j] += gy[i * d + j];
  });
}

// v[K] -> [times, K]; the backward pass sums every row gradient into v.
template <typename T>
Var<T> repeat_rows(Var<T> v, std::size_t times) {
  detail::check(v.valid() && v.rank() == 1, Errc::shape, "repeat_rows: expected rank-1 input");
  detail::check(times >= 1, Errc::usage, "repeat_rows: times must be >= 1");
  const std::size_t k = v.numel();
  auto vv = v.value();
  std::vector<T> y(times * k);
  for (std::size_t r = 0; r < times; ++r) std::copy(vv.begin(), vv.end(), y.begin() + static_cast<long>(r * k));
  const int vi = v.id;
  return v.tape->record({times, k}, std::move(y), {vi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    T* gv = t.grad_buffer(vi);
    for (std::size_t r = 0; r < times; ++r)
      for (std::size_t i = 0; i < k; ++i) gv[i] += gy[r * k + i];
  });
}

// Concatenation along the last dimension; leading dims must agree.
template <typename T>
Var<T> concat_last(Var<T> a, Var<T> b) {
  auto& tape = detail::same_tape(a, b);
  Shape ad = a.dims(), bd = b.dims();
  detail::check(ad.size() == bd.size() && !ad.empty() && std::equal(ad.begin(), ad.end() - 1, bd.begin()),
                Errc::shape, "concat_last: leading dims differ: ", to_string(ad), " vs ", to_string(bd));
  const std::size_t ca = ad.back(), cb = bd.back(), rows = detail::leading(ad), c = ca + cb;
  auto av = a.value(), bv = b.value();
  std::vector<T> y(rows * c);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, y.data() + r * c);
    std::copy_n(bv.data() + r * cb, cb, y.data() + r * c + ca);
  }
  Shape yd = ad;
  yd.back() = c;
  const int ai = a.id, bi = b.id;
  return tape.record(std::move(yd), std::move(y), {ai, bi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    T* ga = t.grad_buffer(ai);
    T* gb = t.grad_buffer(bi);
    for (std::size_t r = 0; r < rows; ++r) {
      if (ga != nullptr)
        for (std::size_t i = 0; i < ca; ++i) ga[r * ca + i] += gy[r * c + i];
      if (gb != nullptr)
        for (std::size_t i = 0; i < cb; ++i) gb[r * cb + i] += gy[r * c + ca + i];
    }
  });
}

// Stacks equally sized values (any rank, same numel) into rows of [n, D].
template <typename T>
Var<T> stack_rows(std::span<const Var<T>> parts) {
  detail::check(!parts.empty(), Errc::usage, "stack_rows: nothing to stack");
  Tape<T>& tape = *parts[0].tape;
  const std::size_t d = parts[0].numel();
  std::vector<T> y;
  y.reserve(parts.size() * d);
  std::vector<int> ids;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p);
    detail::check(p.numel() == d, Errc::shape, "stack_rows: row sizes differ");
    auto pv = p.value();
    y.insert(y.end(), pv.begin(), pv.end());
    ids.push_back(p.id);
  }
  return tape.record({parts.size(), d}, std::move(y), ids, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      T* g = t.grad_buffer(ids[r]);
      if (g == nullptr) continue;
      for (std::size_t i = 0; i < d; ++i) g[i] += gy[r * d + i];
    }
  });
}

// Rows [begin, begin+count) of x[R,C].
template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t count) {
  detail::check(x.valid() && x.rank() == 2, Errc::shape, "slice_rows: expected rank 2");
  const std::size_t rows = x.dim(0), c = x.dim(1);
  detail::check(count >= 1 && begin + count <= rows, Errc::shape, "slice_rows: [", begin, ",", begin + count,
                ") outside ", rows, " rows");
  auto xv = x.value();
  std::vector<T> y(xv.begin() + static_cast<long>(begin * c), xv.begin() + static_cast<long>((begin + count) * c));
  const int xi = x.id;
  return x.tape->record({count, c}, std::move(y), {xi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    T* gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[begin * c + i] += gy[i];
  });
}

// Row i of x[R,C] as a rank-1 value.
template <typename T>
Var<T> row(Var<T> x, std::size_t i) {
  detail::check(x.valid() && x.rank() == 2, Errc::shape, "row: expected rank 2");
  const std::size_t c = x.dim(1);
  detail::check(i < x.dim(0), Errc::shape, "row: index ", i, " outside ", x.dim(0), " rows");
  auto xv = x.value();
  std::vector<T> y(xv.begin() + static_cast<long>(i * c), xv.begin() + static_cast<long>((i + 1) * c));
  const int xi = x.id;
  return x.tape->record({c}, std::move(y), {xi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    T* gx = t.grad_buffer(xi);
    for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[j];
  });
}

// Columns [begin, begin+count) of the trailing dimension.
template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count) {
  detail::check(x.valid() && x.rank() >= 1, Errc::shape, "slice_cols: invalid input");
  const std::size_t c = x.dims().back(), rows = detail::leading(x.dims());
  detail::check(count >= 1 && begin + count <= c, Errc::shape, "slice_cols: [", begin, ",", begin + count,
                ") outside ", c, " columns");
  auto xv = x.value();
  std::vector<T> y(rows * count);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data() + r * c + begin, count, y.data() + r * count);
  Shape yd = x.dims();
  yd.back() = count;
  const int xi = x.id;
  return x.tape->record(std::move(yd), std::move(y), {xi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    T* gx = t.grad_buffer(xi);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < count; ++j) gx[r * c + begin + j] += gy[r * count + j];
  });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape dims) {
  detail::check(x.valid() && numel(dims) == x.numel(), Errc::shape, "reshape: ", to_string(x.dims()), " -> ",
                to_string(dims));
  auto xv = x.value();
  const int xi = x.id;
  return x.tape->record(std::move(dims), {xv.begin(), xv.end()}, {xi}, [=](Tape<T>& t, int self) {
    auto gy = t.grad(self);
    T* gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
}

// Row-major [R,C] -> [R*C].
template <typename T>
Var<T> flatten(Var<T> x) {
  detail::check(x.valid() && x.rank() == 2, Errc::shape, "flatten: expected rank 2, got ", to_string(x.dims()));
  return reshape(x, {x.numel()});
}

// Same value, no gradient path.
template <typename T>
Var<T> detach(Var<T> x) {
  auto xv = x.value();
  return x.tape->constant(x.dims(), {xv.begin(), xv.end()});
}

template <typename T>
Var<T> sum(Var<T> x) {
  T acc = T{0};
  for (T v : x.value()) acc += v;
  const int xi = x.id;
  return x.tape->record({1}, {acc}, {xi}, [=](Tape<T>& t, int self) {
    const T g = t.grad(self)[0];
    T* gx = t.grad_buffer(xi);
    const std::size_t n = t.value(xi).size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

// sum_r weight[r] * -log(max(probs[r, gold[r]], floor)) over rows of probs[R,K].
template <typename T>
Var<T> nll_rows(Var<T> probs, std::span<const int> gold, std::span<const T> weight) {
  detail::check(probs.valid() && probs.rank() == 2, Errc::shape, "nll_rows: probs must be [R,K]");
  const std::size_t rows = probs.dim(0), k = probs.dim(1);
  detail::check(gold.size() == rows && weight.size() == rows, Errc::shape, "nll_rows: ", rows,
                " rows but ", gold.size(), " gold ids and ", weight.size(), " weights");
  auto pv = probs.value();
  T loss = T{0};
  for (std::size_t r = 0; r < rows; ++r) {
    if (weight[r] == T{0}) continue;
    detail::check(gold[r] >= 0 && static_cast<std::size_t>(gold[r]) < k, Errc::data, "nll_rows: gold id ",
                  gold[r], " out of range [0,", k, ")");
    loss -= weight[r] * std::log(std::max(pv[r * k + static_cast<std::size_t>(gold[r])], T(kProbFloor)));
  }
  const int pi = probs.id;
  std::vector<int> gv(gold.begin(), gold.end());
  std::vector<T> wv(weight.begin(), weight.end());
  return probs.tape->record({1}, {loss}, {pi}, [=, gv = std::move(gv), wv = std::move(wv)](Tape<T>& t, int self) {
    const T g = t.grad(self)[0];
    auto pv = t.value(pi);
    T* gp = t.grad_buffer(pi);
    for (std::size_t r = 0; r < rows; ++r) {
      if (wv[r] == T{0}) continue;
      const std::size_t j = r * k + static_cast<std::size_t>(gv[r]);
      // The floor is a constant below kProbFloor, so no gradient there.
      if (pv[j] > T(kProbFloor)) gp[j] -= g * wv[r] / pv[j];
    }
  });
}

// -log(max(probs[gold], floor)) for a single distribution probs[K].
template <typename T>
Var<T> cross_entropy(Var<T> probs, int gold) {
  detail::check(probs.valid() && probs.rank() == 1, Errc::shape, "cross_entropy: probs must be rank 1");
  detail::check(gold >= 0 && static_cast<std::size_t>(gold) < probs.numel(), Errc::data,
                "cross_entropy: gold id ", gold, " out of range [0,", probs.numel(), ")");
  const T w[1] = {T{1}};
  const int g[1] = {gold};
  return nll_rows(reshape(probs, {1, probs.numel()}), std::span<const int>(g), std::span<const T>(w));
}

}  // namespace bnlu
