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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "gesturelm/lm/vocab.hpp"
#include "gesturelm/nn/module.hpp"

namespace gesturelm::lm {

using nn::Index;
using nn::Matrix;
using nn::Tensor;

struct LmConfig {
  Index hidden = 128;
  int layers = 4;
  int heads = 4;
  Index ffn_width = 512;
  int max_positions = 128;
  std::uint64_t seed = 0;

  void validate() const;
};
void to_json(nlohmann::json& j, const LmConfig& c);
void read_config(const nlohmann::json& j, LmConfig& c);

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;

  static LoraConfig large() { return {128, 256.0}; }
  void validate() const;
};
void to_json(nlohmann::json& j, const LoraConfig& c);
void read_config(const nlohmann::json& j, LoraConfig& c);

// Encoder-only masked LM: token + learned absolute position embeddings,
// pre-norm transformer stack, linear LM head with zero-initialised bias.
class MaskedLM : public nn::Module {
 public:
  MaskedLM() = default;
  MaskedLM(const LmConfig& cfg, Vocab vocab, nn::Rng& rng);

  const LmConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  Index hidden() const { return cfg_.hidden; }
  Index vocab_size() const { return vocab_.size(); }

  // token embedding + position embedding, row per id. Positions may repeat.
  Tensor embed(std::span<const Index> ids, std::span<const Index> positions) const;
  Tensor embed_tokens(std::span<const Index> ids) const;
  Tensor embed_positions(std::span<const Index> positions) const;

  // emb: packed [rows x h]; key_valid marks attendable (non-PAD) rows.
  Tensor forward(const Tensor& emb, const nn::SeqLayout& layout, std::span<const std::uint8_t> key_valid = {}) const;
  Tensor lm_logits(const Tensor& hidden) const;
  // Logits for the listed vocabulary ids only, in that order.
  Tensor lm_logits(const Tensor& hidden, std::span<const Index> ids) const;

  // Freezes every existing parameter and adds adapters to all attention
  // projections. Throws std::logic_error when already injected.
  void inject_lora(const LoraConfig& cfg, nn::Rng& rng);
  bool has_lora() const { return lora_.has_value(); }
  // Deep copy (parameters, adapters and trainable flags).
  MaskedLM clone() const;
  const std::optional<LoraConfig>& lora() const { return lora_; }
  nn::NamedTensors adapter_parameters() const;

  const nn::Embedding& token_embedding() const { return tokens_; }
  const nn::Embedding& position_embedding() const { return positions_; }

  void collect_parameters(const std::string& prefix, nn::NamedTensors& out) const override;

  // Tensors plus sidecar {kind, config, vocab, lora}; `extra` merged into the sidecar.
  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static MaskedLM load(const std::filesystem::path& path);

 private:
  void check_ids(std::span<const Index> ids) const;

  LmConfig cfg_;
  Vocab vocab_;
  nn::Embedding tokens_;
  nn::Embedding positions_;
  nn::TransformerStack encoder_;
  nn::Linear head_;
  std::optional<LoraConfig> lora_;
};

std::size_t count_parameters(const nn::Module& model, bool trainable_only);

struct MlmConfig {
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-3;
  double warmup_ratio = 0.03;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  double mask_prob = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
};
void to_json(nlohmann::json& j, const MlmConfig& c);
void read_config(const nlohmann::json& j, MlmConfig& c);

struct MlmEpoch {
  int epoch = 0;
  double train_loss = 0;
};

// Plain masked-LM pretraining of every parameter on <s> ids </s> sequences.
// Each non-special token is masked with probability mask_prob; a sequence
// that draws no mask gets one at a uniformly chosen token.
std::vector<MlmEpoch> pretrain_mlm(MaskedLM& model, const std::vector<std::vector<int>>& sentences,
                                   const MlmConfig& cfg, const std::function<void(const MlmEpoch&)>& on_epoch = {});

}  // namespace gesturelm::lm
