// Copyright 2026 The lpskit Authors.
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

// Reverse-mode bookkeeping on top of the explicit kernels in kernels.hpp.
// Every operator supplies its own analytic backward; this file only records
// the graph and replays the backward closures in reverse topological order.

#ifndef LPS_AUTODIFF_HPP_
#define LPS_AUTODIFF_HPP_

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lps/tensor.hpp"

namespace lps {

template <typename T>
struct Node {
  using NodePtr = std::shared_ptr<Node>;
  using BackwardFn =
      std::function<void(const BasicTensor<T>& grad_out, std::vector<NodePtr>& parents)>;

  BasicTensor<T> value;
  BasicTensor<T> grad;  // empty until something flows into it
  std::vector<NodePtr> parents;
  BackwardFn backward;
  bool requires_grad = false;

  // Adds `g` into this node's gradient buffer, allocating it on first use.
  void accumulate(const BasicTensor<T>& g) {
    if (!requires_grad) return;
    ensure_grad();
    require_same_shape(grad.shape(), g.shape(), "gradient accumulation");
    auto dst = grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  void ensure_grad() {
    if (grad.shape() != value.shape()) grad = BasicTensor<T>(value.shape());
  }
};

template <typename T>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<T>>;

  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var constant(BasicTensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }
  static Var leaf(BasicTensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  const BasicTensor<T>& value() const { return node_->value; }
  const BasicTensor<T>& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Creates a graph node for an operator result. The backward closure receives
// the upstream gradient and the parent list in the order given here.
template <typename T>
Var<T> make_result(BasicTensor<T> value, std::vector<Var<T>> parents,
                   typename Node<T>::BackwardFn backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (auto& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.node());
  }
  if (n->requires_grad) n->backward = std::move(backward);
  return Var<T>(std::move(n));
}

// Propagates `seed` (ones for a scalar root when empty) back through the
// graph. Gradients on leaves accumulate additively; nothing is zeroed here.
template <typename T>
void backward(const Var<T>& root, BasicTensor<T> seed = {}) {
  if (!root.requires_grad()) return;
  if (seed.empty()) {
    if (root.value().size() != 1) {
      throw Error(ErrorKind::kShape,
                  "backward without a seed needs a scalar root, got " +
                      shape_str(root.shape()));
    }
    seed = BasicTensor<T>(root.shape(), T(1));
  }

  // Iterative post-order DFS gives a topological order without recursion.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-pass scratch; leaves keep theirs.
  for (Node<T>* n : order) {
    if (n->backward) n->grad = BasicTensor<T>();
  }
  root.node()->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (!n->backward || n->grad.empty()) continue;
    n->backward(n->grad, n->parents);
  }
}

// A named trainable tensor. The value and gradient live in a leaf node so
// graph operators can reference it directly.
template <typename T>
class Param {
 public:
  Param(std::string name, BasicTensor<T> value) : name_(std::move(name)) {
    var_ = Var<T>::leaf(std::move(value));
    var_.node()->ensure_grad();
  }

  const std::string& name() const { return name_; }
  const Var<T>& var() const { return var_; }
  BasicTensor<T>& value() { return var_.node()->value; }
  const BasicTensor<T>& value() const { return var_.node()->value; }
  BasicTensor<T>& grad() {
    var_.node()->ensure_grad();
    return var_.node()->grad;
  }
  const BasicTensor<T>& grad() const { return var_.node()->grad; }
  void reset_grad() {
    var_.node()->ensure_grad();
    var_.node()->grad.fill(T(0));
  }

 private:
  std::string name_;
  Var<T> var_;
};

// Owns parameters with stable addresses, in registration order.
template <typename T>
class ParamStore {
 public:
  Param<T>& create(const std::string& name, BasicTensor<T> value) {
    for (const auto& p : params_) {
      if (p.name() == name) {
        throw Error(ErrorKind::kValidation, "duplicate parameter name " + name,
                    {{"name", name}});
      }
    }
    params_.emplace_back(name, std::move(value));
    return params_.back();
  }

  std::size_t size() const { return params_.size(); }
  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  Param<T>* find(const std::string& name) {
    for (auto& p : params_) {
      if (p.name() == name) return &p;
    }
    return nullptr;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value().size();
    return n;
  }

  void reset_grads() {
    for (auto& p : params_) p.reset_grad();
  }

  // Plain gradient descent step: value -= lr * grad.
  void sgd_step(T lr) {
    for (auto& p : params_) {
      auto v = p.value().data();
      auto g = p.grad().data();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    }
  }

 private:
  std::deque<Param<T>> params_;
};

}  // namespace lps

#endif  // LPS_AUTODIFF_HPP_
