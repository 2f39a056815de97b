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

#include <functional>
#include <span>
#include <vector>

#include "bnlu/error.hpp"
#include "bnlu/tensor.hpp"

namespace bnlu {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Shape& dims() const { return tape->dims(id); }
  std::size_t dim(std::size_t i) const { return dims().at(i); }
  std::size_t rank() const { return dims().size(); }
  std::size_t numel() const { return tape->value(id).size(); }
  std::span<const T> value() const { return tape->value(id); }
  std::span<const T> grad() const { return tape->grad(id); }
  T item() const { return value()[0]; }
};

/// Records a forward computation as a flat list of nodes in creation order,
/// which is a topological order. backward() visits the nodes in exact
/// reverse order.
///
/// Leaves are either constants (owned copies) or parameters bound to an
/// external Tensor; bound leaves read the tensor's values in place and
/// accumulate their gradient straight into Tensor::grad().
///
/// A tape created with record_grad=false never builds backward closures,
/// which makes inference cheaper.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  explicit Tape(bool record_grad = true) : record_grad_(record_grad) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool record_grad() const { return record_grad_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> param(Tensor<T>& tensor) {
    Node n;
    n.dims = tensor.dims();
    n.bound = &tensor;
    n.needs_grad = record_grad_ && tensor.requires_grad();
    return push_node(std::move(n));
  }

  Var<T> constant(const Tensor<T>& tensor) { return constant(tensor.dims(), {tensor.data().begin(), tensor.data().end()}); }

  Var<T> constant(Shape dims, std::vector<T> data) {
    detail::check(numel(dims) == data.size(), Errc::shape, "constant data size ", data.size(),
                  " does not match dims ", to_string(dims));
    Node n;
    n.dims = std::move(dims);
    n.value = std::move(data);
    return push_node(std::move(n));
  }

  /// Appends a computed node. `fn` runs during backward only if some input
  /// requires a gradient.
  Var<T> record(Shape dims, std::vector<T> value, std::initializer_list<int> inputs, Backward fn) {
    return record(std::move(dims), std::move(value), std::span<const int>(inputs.begin(), inputs.size()), std::move(fn));
  }

  Var<T> record(Shape dims, std::vector<T> value, std::span<const int> inputs, Backward fn) {
    Node n;
    n.dims = std::move(dims);
    n.value = std::move(value);
    if (record_grad_) {
      for (int in : inputs) n.needs_grad = n.needs_grad || nodes_.at(static_cast<std::size_t>(in)).needs_grad;
      if (n.needs_grad) n.backward = std::move(fn);
    }
    return push_node(std::move(n));
  }

  const Shape& dims(int id) const { return node(id).dims; }

  std::span<const T> value(int id) const {
    const Node& n = node(id);
    if (n.bound != nullptr) return n.bound->data();
    return n.value;
  }

  bool needs_grad(int id) const { return node(id).needs_grad; }

  /// Gradient of the last backward() loss with respect to node `id`; empty
  /// if the node does not participate in differentiation.
  std::span<const T> grad(int id) const {
    const Node& n = node(id);
    if (!n.needs_grad) return {};
    if (n.bound != nullptr) return n.bound->grad();
    return n.grad;
  }

  /// Accumulation target for node `id`, or nullptr when no gradient flows.
  T* grad_buffer(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return nullptr;
    if (n.bound != nullptr) return n.bound->grad().data();
    return n.grad.data();
  }

  void backward(Var<T> loss) {
    detail::check(loss.tape == this, Errc::usage, "backward: loss belongs to another tape");
    detail::check(record_grad_, Errc::usage, "backward: tape was created without gradient recording");
    detail::check(!consumed_, Errc::usage, "backward: tape already consumed; call reset() first");
    detail::check(value(loss.id).size() == 1, Errc::shape, "backward: loss must be scalar, got dims ",
                  to_string(dims(loss.id)));
    consumed_ = true;
    for (auto& n : nodes_) {
      if (n.needs_grad && n.bound == nullptr) n.grad.assign(n.value.size(), T{0});
    }
    T* seed = grad_buffer(loss.id);
    if (seed == nullptr) return;
    seed[0] += T{1};
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.needs_grad && n.backward) n.backward(*this, i);
    }
  }

  void reset() {
    nodes_.clear();
    consumed_ = false;
  }

 private:
  struct Node {
    Shape dims;
    std::vector<T> value;
    std::vector<T> grad;
    Tensor<T>* bound = nullptr;
    bool needs_grad = false;
    Backward backward;
  };

  const Node& node(int id) const {
    detail::check(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), Errc::usage, "invalid tape id ", id);
    return nodes_[static_cast<std::size_t>(id)];
  }

  Var<T> push_node(Node n) {
    nodes_.push_back(std::move(n));
    return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  bool record_grad_;
  bool consumed_ = false;
};

}  // namespace bnlu
