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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bnlu/error.hpp"
#include "bnlu/rng.hpp"
#include "bnlu/tape.hpp"

namespace bnlu {

struct GradCheckGroup {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
  double max_abs_numeric = 0.0;
  std::size_t coords_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_error = 0.0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace detail {

template <typename T, typename BuildLoss>
std::vector<std::vector<double>> analytic_gradients(BuildLoss& build_loss, std::span<const NamedParam<T>> params) {
  for (const auto& p : params) p.tensor->zero_grad();
  {
    Tape<T> tape(true);
    Var<T> loss = build_loss(tape);
    tape.backward(loss);
  }
  std::vector<std::vector<double>> out;
  for (const auto& p : params) {
    std::vector<double> g(p.tensor->numel(), 0.0);
    if (p.tensor->requires_grad())
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(p.tensor->grad()[i]);
    out.push_back(std::move(g));
  }
  return out;
}

template <typename R, typename BuildLoss>
GradCheckReport compare_central_differences(const std::vector<std::vector<double>>& analytic, BuildLoss& build_loss,
                                            std::span<const NamedParam<R>> params, double eps,
                                            std::size_t max_coords, std::uint64_t seed) {
  check(eps > 0.0, Errc::usage, "finite_diff_check: eps must be positive");
  check(analytic.size() == params.size(), Errc::usage, "finite_diff_check: parameter lists differ");
  auto evaluate = [&]() {
    Tape<R> tape(false);
    return build_loss(tape).item();
  };
  const R base = evaluate();
  check(evaluate() == base, Errc::usage, "finite_diff_check: loss is not deterministic");

  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<R>& t = *params[k].tensor;
    check(analytic[k].size() == t.numel(), Errc::usage, "finite_diff_check: size mismatch for ", params[k].name);
    GradCheckGroup group{params[k].name};
    std::vector<std::size_t> coords(t.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      for (std::size_t i = 0; i < max_coords; ++i) std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      const R saved = t[c];
      t[c] = saved + static_cast<R>(eps);
      const R up = evaluate();
      t[c] = saved - static_cast<R>(eps);
      const R down = evaluate();
      t[c] = saved;
      const double numeric = static_cast<double>((up - down) / (R{2} * static_cast<R>(eps)));
      group.max_rel_error = std::max(group.max_rel_error, relative_error(analytic[k][c], numeric));
      group.max_abs_grad = std::max(group.max_abs_grad, std::abs(analytic[k][c]));
      group.max_abs_numeric = std::max(group.max_abs_numeric, std::abs(numeric));
    }
    group.coords_checked = coords.size();
    report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace detail

/// Compares reverse-mode gradients of a scalar loss against central
/// differences (f(p + eps) - f(p - eps)) / (2 eps).
///
/// `build_loss` records the loss on the tape it is given and returns it; it
/// is called once with backward for the analytic gradient and twice per
/// checked coordinate. Tensors with more than `max_coords` entries are
/// checked on a random sample of that many coordinates.
template <typename T, typename BuildLoss>
GradCheckReport finite_diff_check(BuildLoss&& build_loss, std::span<const NamedParam<T>> params, double eps = 1e-5,
                                  std::size_t max_coords = 256, std::uint64_t seed = 0) {
  const auto analytic = detail::analytic_gradients(build_loss, params);
  return detail::compare_central_differences(analytic, build_loss, params, eps, max_coords, seed);
}

/// As above, but the differences are taken on a second instantiation of the
/// same loss in a wider type R (`ref_params` must hold the same values).
/// Central differences in type T bottom out near ulp(f) / eps, which can
/// exceed the gradient of weakly coupled coordinates; the reference removes
/// that floor while the gradient under test stays in T.
template <typename T, typename R, typename BuildLoss, typename BuildRef>
GradCheckReport finite_diff_check(BuildLoss&& build_loss, std::span<const NamedParam<T>> params, BuildRef&& build_ref,
                                  std::span<const NamedParam<R>> ref_params, double eps = 1e-5,
                                  std::size_t max_coords = 256, std::uint64_t seed = 0) {
  const auto analytic = detail::analytic_gradients(build_loss, params);
  return detail::compare_central_differences(analytic, build_ref, ref_params, eps, max_coords, seed);
}

}  // namespace bnlu
