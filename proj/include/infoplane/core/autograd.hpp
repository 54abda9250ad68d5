// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "infoplane/core/tensor.hpp"

namespace infoplane {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the reverse-mode tape. `backward` reads `grad` and accumulates into the
// gradients of `inputs`; it receives the node itself so closures never own their node.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward;

  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

// Handle to a tape node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad = Tensor(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }
  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

bool grad_enabled();

// Disables tape recording for its lifetime (evaluation passes, frozen prefixes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op result. When recording is on and any input needs a gradient, the node keeps
// its inputs and backward closure; otherwise it is a plain constant.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Runs reverse-mode accumulation from a scalar (size-1) root.
void backward(const Var& root);

}  // namespace infoplane
