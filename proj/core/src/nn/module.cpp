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

#include "gesturelm/nn/module.hpp"

#include <cstring>
#include <stdexcept>

namespace gesturelm::nn {

Matrix normal_matrix(Index rows, Index cols, Real stddev, Rng& rng) {
  std::normal_distribution<Real> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

NamedTensors Module::named_parameters(const std::string& prefix) const {
  NamedTensors out;
  collect_parameters(prefix, out);
  return out;
}

std::vector<Tensor> Module::parameters(bool trainable_only) const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) {
    if (!trainable_only || t.requires_grad()) out.push_back(t);
  }
  return out;
}

std::size_t Module::parameter_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& t : parameters(trainable_only)) n += static_cast<std::size_t>(t.value().size());
  return n;
}

void Module::set_trainable(bool trainable) {
  for (auto& t : parameters()) t.set_requires_grad(trainable);
}

void Module::zero_grad() {
  for (auto& t : parameters()) t.zero_grad();
}

void Module::copy_state_from(const Module& other) {
  auto mine = named_parameters();
  auto theirs = other.named_parameters();
  if (mine.size() != theirs.size()) throw std::logic_error("copy_state_from: parameter sets differ");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != theirs[i].first || mine[i].second.rows() != theirs[i].second.rows() ||
        mine[i].second.cols() != theirs[i].second.cols()) {
      throw std::logic_error("copy_state_from: mismatch at " + mine[i].first);
    }
    mine[i].second.mutable_value() = theirs[i].second.value();
    mine[i].second.set_requires_grad(theirs[i].second.requires_grad());
  }
}

ParameterSnapshot ParameterSnapshot::take(const Module& module) {
  ParameterSnapshot snap;
  for (auto& [name, t] : module.named_parameters()) snap.values.emplace_back(name, t.value());
  return snap;
}

std::vector<std::string> ParameterSnapshot::changed(const Module& module) const {
  std::vector<std::string> out;
  auto current = module.named_parameters();
  for (const auto& [name, t] : current) {
    const Matrix* before = nullptr;
    for (const auto& [n, m] : values) {
      if (n == name) {
        before = &m;
        break;
      }
    }
    if (!before) {
      out.push_back(name);  // parameter did not exist at snapshot time
      continue;
    }
    const Matrix& now = t.value();
    if (now.rows() != before->rows() || now.cols() != before->cols() ||
        std::memcmp(now.data(), before->data(), sizeof(Real) * static_cast<std::size_t>(now.size())) != 0) {
      out.push_back(name);
    }
  }
  return out;
}

Linear::Linear(Index in, Index out, Rng& rng, Real init_std, bool bias)
    : weight_(normal_matrix(in, out, init_std, rng), true) {
  if (bias) bias_ = Tensor(Matrix::Zero(1, out), true);
}

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = linear(x, weight_, bias_);
  if (!has_lora()) return y;
  Tensor delta = matmul(matmul(x, lora_.down), lora_.up);
  return add(y, scale(delta, lora_.scaling));
}

void Linear::collect_parameters(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + "weight", weight_);
  if (bias_.defined()) out.emplace_back(prefix + "bias", bias_);
  if (has_lora()) {
    out.emplace_back(prefix + "lora_a", lora_.down);
    out.emplace_back(prefix + "lora_b", lora_.up);
  }
}

void Linear::inject_lora(int rank, Real alpha, Rng& rng) {
  if (has_lora()) throw std::logic_error("LoRA adapter already injected");
  if (rank < 1) throw std::invalid_argument("LoRA rank must be >= 1");
  const Index in = in_features();
  const Index out = out_features();
  lora_.down = Tensor(normal_matrix(in, rank, 1.0 / std::sqrt(static_cast<Real>(in)), rng), true);
  lora_.up = Tensor(Matrix::Zero(rank, out), true);
  lora_.scaling = alpha / static_cast<Real>(rank);
}

LayerNorm::LayerNorm(Index width)
    : gamma_(Matrix::Ones(1, width), true), beta_(Matrix::Zero(1, width), true) {}

void LayerNorm::collect_parameters(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + "gamma", gamma_);
  out.emplace_back(prefix + "beta", beta_);
}

Embedding::Embedding(Index count, Index width, Rng& rng, Real init_std)
    : table_(normal_matrix(count, width, init_std, rng), true) {}

void Embedding::collect_parameters(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + "table", table_);
}

TransformerLayer::TransformerLayer(const TransformerConfig& cfg, Rng& rng)
    : heads_(cfg.heads),
      ln_attn_(cfg.width),
      q_(cfg.width, cfg.width, rng),
      k_(cfg.width, cfg.width, rng),
      v_(cfg.width, cfg.width, rng),
      o_(cfg.width, cfg.width, rng, 0.02 / std::sqrt(2.0 * cfg.layers)),
      ln_ffn_(cfg.width),
      ffn_in_(cfg.width, cfg.ffn_width, rng),
      ffn_out_(cfg.ffn_width, cfg.width, rng, 0.02 / std::sqrt(2.0 * cfg.layers)) {
  if (cfg.width % cfg.heads != 0) throw std::invalid_argument("transformer width must be divisible by heads");
}

Tensor TransformerLayer::forward(const Tensor& x, const SeqLayout& layout,
                                 std::span<const std::uint8_t> key_valid) const {
  Tensor h = ln_attn_.forward(x);
  Tensor a = attention(q_.forward(h), k_.forward(h), v_.forward(h), layout, heads_, key_valid);
  Tensor x1 = add(x, o_.forward(a));
  Tensor f = ffn_out_.forward(gelu(ffn_in_.forward(ln_ffn_.forward(x1))));
  return add(x1, f);
}

void TransformerLayer::collect_parameters(const std::string& prefix, NamedTensors& out) const {
  ln_attn_.collect_parameters(prefix + "ln_attn.", out);
  q_.collect_parameters(prefix + "attn.q.", out);
  k_.collect_parameters(prefix + "attn.k.", out);
  v_.collect_parameters(prefix + "attn.v.", out);
  o_.collect_parameters(prefix + "attn.o.", out);
  ln_ffn_.collect_parameters(prefix + "ln_ffn.", out);
  ffn_in_.collect_parameters(prefix + "ffn.in.", out);
  ffn_out_.collect_parameters(prefix + "ffn.out.", out);
}

void TransformerLayer::inject_attention_lora(int rank, Real alpha, Rng& rng) {
  for (Linear* l : {&q_, &k_, &v_, &o_}) l->inject_lora(rank, alpha, rng);
}

TransformerStack::TransformerStack(const TransformerConfig& cfg, Rng& rng) : cfg_(cfg), final_ln_(cfg.width) {
  layers_.reserve(static_cast<std::size_t>(cfg.layers));
  for (int i = 0; i < cfg.layers; ++i) layers_.emplace_back(cfg, rng);
}

Tensor TransformerStack::forward(const Tensor& x, const SeqLayout& layout,
                                 std::span<const std::uint8_t> key_valid) const {
  Tensor h = x;
  for (const auto& layer : layers_) h = layer.forward(h, layout, key_valid);
  return final_ln_.forward(h);
}

void TransformerStack::collect_parameters(const std::string& prefix, NamedTensors& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect_parameters(prefix + "layers." + std::to_string(i) + ".", out);
  }
  final_ln_.collect_parameters(prefix + "final_ln.", out);
}

void TransformerStack::inject_attention_lora(int rank, Real alpha, Rng& rng) {
  for (auto& layer : layers_) layer.inject_attention_lora(rank, alpha, rng);
}

}  // namespace gesturelm::nn
