// Copyright 2026 The MpoxMamba Authors. All Rights Reserved.
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

// Reverse-mode differentiation over a dynamically recorded tape.
//
// Every differentiable op produces a Var whose node remembers its inputs and
// a backward closure. Var::backward() orders the reachable nodes
// topologically and runs the closures from the output back to the leaves,
// each closure reading its node's gradient and accumulating into the
// gradients of its inputs. When no input requires a gradient, or recording is
// disabled with NoGradGuard, the node keeps no inputs and intermediate values
// are released as soon as the caller drops them.

#ifndef MPOX_AUTODIFF_H_
#define MPOX_AUTODIFF_H_

#include <functional>
#include <memory>
#include <vector>

#include "mpox/tensor.h"

namespace mpox {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until something flows back
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& ensure_grad() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return !grad.empty(); }
};

bool grad_enabled();

// Disables tape recording for its lifetime (thread-local).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_->requires_grad; }

  // Gradient accumulated by the last backward pass(es); empty if none.
  const Tensor<T>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Tensor<T>(); }

  // Direct access for optimizers and loaders. Only valid on leaves.
  Tensor<T>& mutable_value() { return node_->value; }
  Tensor<T>& mutable_grad() { return node_->ensure_grad(); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

  // Seeds d(self)/d(self) = 1; requires a single-element value.
  void backward() const;
  void backward(const Tensor<T>& seed) const;

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds the output Var of an op. `fn` receives the output node once its
// gradient is populated and must accumulate into `inputs[i]->ensure_grad()`
// for every input that requires a gradient.
template <typename T>
Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs,
              std::function<void(Node<T>&)> fn) {
  Var<T> out(std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  Node<T>* node = out.node();
  node->requires_grad = true;
  node->inputs.reserve(inputs.size());
  for (const auto& in : inputs) node->inputs.push_back(in.node_ptr());
  node->backward_fn = std::move(fn);
  return out;
}

// Accumulates `g` into the gradient of input `i` of `node` if it wants one.
template <typename T>
inline Tensor<T>* input_grad(Node<T>& node, std::size_t i) {
  Node<T>* in = node.inputs[i].get();
  if (!in->requires_grad) return nullptr;
  return &in->ensure_grad();
}

extern template class Var<float>;
extern template class Var<double>;

}  // namespace mpox

#endif  // MPOX_AUTODIFF_H_
