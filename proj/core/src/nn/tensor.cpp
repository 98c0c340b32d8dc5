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

#include "gesturelm/nn/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace gesturelm::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Matrix& Node::grad_buffer() {
  if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(Real v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m));
}

void Tensor::zero_grad() {
  if (node_) node_->grad.resize(0, 0);
}

void Tensor::set_requires_grad(bool flag) {
  if (!node_->inputs.empty()) throw std::logic_error("set_requires_grad on a non-leaf tensor");
  node_->requires_grad = flag;
}

Real Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw std::logic_error("item() on a non-scalar tensor");
  return node_->value(0, 0);
}

void Tensor::backward() const {
  if (rows() != 1 || cols() != 1) throw std::logic_error("backward() requires a scalar tensor");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the recorded graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.contains(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->accumulate(Matrix::Constant(1, 1, 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() > 0) node->backward(*node);
  }
  // Interior gradients are scratch; only leaves keep theirs.
  for (Node* node : order) {
    if (!node->inputs.empty()) node->grad.resize(0, 0);
  }
}

Tensor Tensor::detach() const { return Tensor(node_->value, false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_result(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
  Tensor out(std::move(value));
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.node());
  node.backward = std::move(backward);
  return out;
}

}  // namespace gesturelm::nn
