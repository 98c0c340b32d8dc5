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

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gesturelm/nn/ops.hpp"
#include "gesturelm/nn/tensor.hpp"

namespace gesturelm::nn {

using Rng = std::mt19937_64;
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

Matrix normal_matrix(Index rows, Index cols, Real stddev, Rng& rng);

// Parameter containers list their tensors explicitly so that modules stay
// movable; Tensor handles share nodes, so returned handles alias the live
// parameters.
class Module {
 public:
  virtual ~Module() = default;
  virtual void collect_parameters(const std::string& prefix, NamedTensors& out) const = 0;

  NamedTensors named_parameters(const std::string& prefix = "") const;
  std::vector<Tensor> parameters(bool trainable_only = false) const;
  std::size_t parameter_count(bool trainable_only = false) const;
  void set_trainable(bool trainable);
  void zero_grad();
  // Copies values and trainable flags from a module with the same parameter names.
  void copy_state_from(const Module& other);
};

// Bitwise copy of every parameter value, for freeze audits.
struct ParameterSnapshot {
  std::vector<std::pair<std::string, Matrix>> values;

  static ParameterSnapshot take(const Module& module);
  // Names of parameters whose values differ bitwise from the snapshot.
  std::vector<std::string> changed(const Module& module) const;
};

struct LoraAdapter {
  Tensor down;  // [in x r], random init
  Tensor up;    // [r x out], zero init
  Real scaling = 1.0;
};

// y = x W + b, optionally plus (alpha / r) * (x A) B from a low-rank adapter.
class Linear : public Module {
 public:
  Linear() = default;
  Linear(Index in, Index out, Rng& rng, Real init_std = 0.02, bool bias = true);

  Tensor forward(const Tensor& x) const;
  void collect_parameters(const std::string& prefix, NamedTensors& out) const override;

  // Adds an adapter; throws std::logic_error when one is already present.
  void inject_lora(int rank, Real alpha, Rng& rng);
  bool has_lora() const { return lora_.down.defined(); }
  const LoraAdapter& lora() const { return lora_; }

  Index in_features() const { return weight_.rows(); }
  Index out_features() const { return weight_.cols(); }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
  LoraAdapter lora_;
};

class LayerNorm : public Module {
 public:
  LayerNorm() = default;
  explicit LayerNorm(Index width);
  Tensor forward(const Tensor& x) const { return layer_norm(x, gamma_, beta_); }
  void collect_parameters(const std::string& prefix, NamedTensors& out) const override;

 private:
  Tensor gamma_;
  Tensor beta_;
};

class Embedding : public Module {
 public:
  Embedding() = default;
  Embedding(Index count, Index width, Rng& rng, Real init_std = 0.02);
  Tensor forward(std::span<const Index> ids) const { return gather_rows(table_, ids); }
  const Tensor& table() const { return table_; }
  Index count() const { return table_.rows(); }
  void collect_parameters(const std::string& prefix, NamedTensors& out) const override;

 private:
  Tensor table_;
};

struct TransformerConfig {
  Index width = 128;
  int heads = 4;
  int layers = 4;
  Index ffn_width = 512;
};

// Pre-norm encoder block: x + Attn(LN(x)), then x + FFN(LN(x)).
class TransformerLayer : public Module {
 public:
  TransformerLayer() = default;
  TransformerLayer(const TransformerConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x, const SeqLayout& layout, std::span<const std::uint8_t> key_valid) const;
  void collect_parameters(const std::string& prefix, NamedTensors& out) const override;
  // Injects adapters into the query/key/value/output projections.
  void inject_attention_lora(int rank, Real alpha, Rng& rng);

 private:
  int heads_ = 1;
  LayerNorm ln_attn_;
  Linear q_, k_, v_, o_;
  LayerNorm ln_ffn_;
  Linear ffn_in_, ffn_out_;
};

class TransformerStack : public Module {
 public:
  TransformerStack() = default;
  TransformerStack(const TransformerConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x, const SeqLayout& layout, std::span<const std::uint8_t> key_valid = {}) const;
  void collect_parameters(const std::string& prefix, NamedTensors& out) const override;
  void inject_attention_lora(int rank, Real alpha, Rng& rng);
  const TransformerConfig& config() const { return cfg_; }

 private:
  TransformerConfig cfg_;
  std::vector<TransformerLayer> layers_;
  LayerNorm final_ln_;
};

}  // namespace gesturelm::nn
