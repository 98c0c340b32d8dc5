// Copyright 2026 The GestureLM Authors
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

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Tensor is a cheap handle to a graph node. Operations record their inputs
// and a backward closure only when at least one input requires a gradient, so
// inference over frozen weights builds no graph at all. Frozen parameters are
// simply leaves with requires_grad == false; ops skip gradient work for them.

#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <vector>

namespace gesturelm::nn {

using Real = double;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<Real, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // grad += g, allocating a zero gradient on first use.
  void accumulate(const Matrix& g);
  Matrix& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor scalar(Real v);

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  // Direct mutation is reserved for leaves (optimizers, checkpoint loading).
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_ && node_->grad.size() > 0; }
  void zero_grad();

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag);

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Real item() const;

  // Seeds d(self)/d(self) = 1 and propagates to every reachable leaf.
  void backward() const;
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds an op result. The closure receives the result node; its grad holds
// dL/d(result) and inputs are reachable via node.inputs in the given order.
Tensor make_result(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> backward);

}  // namespace gesturelm::nn
