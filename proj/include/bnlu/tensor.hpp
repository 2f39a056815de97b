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
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bnlu/error.hpp"
#include "bnlu/rng.hpp"

namespace bnlu {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

/// Dense row-major array. When requires_grad is set a same-shape gradient
/// buffer is kept alongside the values; a Tape bound to this tensor
/// accumulates into it during backward.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape dims, bool requires_grad = false)
      : dims_(std::move(dims)), data_(bnlu::numel(dims_), T{0}) {
    set_requires_grad(requires_grad);
    validate();
  }

  Tensor(Shape dims, std::vector<T> data, bool requires_grad = false)
      : dims_(std::move(dims)), data_(std::move(data)) {
    detail::check(data_.size() == bnlu::numel(dims_), Errc::shape, "tensor data size ", data_.size(),
                  " does not match dims ", to_string(dims_));
    set_requires_grad(requires_grad);
    validate();
  }

  const Shape& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t numel() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) {
    requires_grad_ = on;
    if (on) {
      grad_.assign(data_.size(), T{0});
    } else {
      grad_.clear();
    }
  }
  void zero_grad() { std::fill(grad_.begin(), grad_.end(), T{0}); }

  void fill_normal(Rng& rng, double stddev) {
    for (auto& x : data_) x = static_cast<T>(rng.normal(0.0, stddev));
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(dims_, std::move(out), requires_grad_);
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  void validate() const {
    for (auto d : dims_) detail::check(d > 0, Errc::shape, "tensor dims must be positive, got ", to_string(dims_));
  }

  Shape dims_;
  std::vector<T> data_;
  std::vector<T> grad_;
  bool requires_grad_ = false;
};

// A parameter together with its stable name (checkpoints, gradcheck, Adam).
template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* tensor;
};

}  // namespace bnlu
