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

#include "gesturelm/lm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gesturelm/config_reader.hpp"
#include "gesturelm/error.hpp"
#include "gesturelm/nn/checkpoint.hpp"
#include "gesturelm/nn/optim.hpp"

namespace gesturelm::lm {

void LmConfig::validate() const {
  if (hidden < 1 || layers < 0 || heads < 1 || ffn_width < 1 || max_positions < 1) {
    throw UsageError("lm: hidden, heads, ffn_width and max_positions must be positive");
  }
  if (hidden % heads != 0) throw UsageError("lm: hidden must be divisible by heads");
}

void to_json(nlohmann::json& j, const LmConfig& c) {
  j = {{"hidden", c.hidden}, {"layers", c.layers},     {"heads", c.heads},
       {"ffn_width", c.ffn_width}, {"max_positions", c.max_positions}, {"seed", c.seed}};
}

void read_config(const nlohmann::json& j, LmConfig& c) {
  ConfigReader r(j, "lm");
  r.get("hidden", c.hidden);
  r.get("layers", c.layers);
  r.get("heads", c.heads);
  r.get("ffn_width", c.ffn_width);
  r.get("max_positions", c.max_positions);
  r.get("seed", c.seed);
  r.finish();
}

void LoraConfig::validate() const {
  if (rank < 1) throw UsageError("lora: rank must be >= 1");
  if (!(alpha > 0)) throw UsageError("lora: alpha must be positive");
}

void to_json(nlohmann::json& j, const LoraConfig& c) { j = {{"rank", c.rank}, {"alpha", c.alpha}}; }

void read_config(const nlohmann::json& j, LoraConfig& c) {
  ConfigReader r(j, "lora");
  r.get("rank", c.rank);
  r.get("alpha", c.alpha);
  r.finish();
}

MaskedLM::MaskedLM(const LmConfig& cfg, Vocab vocab, nn::Rng& rng) : cfg_(cfg), vocab_(std::move(vocab)) {
  cfg_.validate();
  tokens_ = nn::Embedding(vocab_.size(), cfg_.hidden, rng);
  positions_ = nn::Embedding(cfg_.max_positions, cfg_.hidden, rng);
  encoder_ = nn::TransformerStack({cfg_.hidden, cfg_.heads, cfg_.layers, cfg_.ffn_width}, rng);
  head_ = nn::Linear(cfg_.hidden, vocab_.size(), rng);
}

void MaskedLM::check_ids(std::span<const Index> ids) const {
  for (Index id : ids) {
    if (id < 0 || id >= vocab_size()) throw UsageError("token id " + std::to_string(id) + " out of vocabulary range");
  }
}

Tensor MaskedLM::embed_tokens(std::span<const Index> ids) const {
  check_ids(ids);
  return tokens_.forward(ids);
}

Tensor MaskedLM::embed_positions(std::span<const Index> positions) const {
  for (Index p : positions) {
    if (p < 0 || p >= cfg_.max_positions) {
      throw UsageError("position " + std::to_string(p) + " exceeds max_positions " +
                       std::to_string(cfg_.max_positions));
    }
  }
  return positions_.forward(positions);
}

Tensor MaskedLM::embed(std::span<const Index> ids, std::span<const Index> positions) const {
  if (ids.size() != positions.size()) throw UsageError("embed: ids and positions differ in length");
  return nn::add(embed_tokens(ids), embed_positions(positions));
}

Tensor MaskedLM::forward(const Tensor& emb, const nn::SeqLayout& layout, std::span<const std::uint8_t> key_valid) const {
  if (emb.cols() != cfg_.hidden) throw UsageError("lm forward: embedding width mismatch");
  if (layout.total_rows() != emb.rows()) throw UsageError("lm forward: layout does not cover the embeddings");
  if (!key_valid.empty() && static_cast<Index>(key_valid.size()) != emb.rows()) {
    throw UsageError("lm forward: attention mask length mismatch");
  }
  return encoder_.forward(emb, layout, key_valid);
}

Tensor MaskedLM::lm_logits(const Tensor& hidden) const { return head_.forward(hidden); }

Tensor MaskedLM::lm_logits(const Tensor& hidden, std::span<const Index> ids) const {
  check_ids(ids);
  return nn::linear(hidden, nn::select_cols(head_.weight(), ids), nn::select_cols(head_.bias(), ids));
}

void MaskedLM::inject_lora(const LoraConfig& cfg, nn::Rng& rng) {
  if (lora_) throw std::logic_error("LoRA adapters are already injected");
  cfg.validate();
  set_trainable(false);
  encoder_.inject_attention_lora(cfg.rank, cfg.alpha, rng);
  lora_ = cfg;
}

MaskedLM MaskedLM::clone() const {
  nn::Rng rng(0);
  MaskedLM copy(cfg_, vocab_, rng);
  if (lora_) copy.inject_lora(*lora_, rng);
  copy.copy_state_from(*this);
  return copy;
}

nn::NamedTensors MaskedLM::adapter_parameters() const {
  nn::NamedTensors out;
  for (auto& [name, t] : named_parameters()) {
    if (name.find(".lora_") != std::string::npos) out.emplace_back(name, t);
  }
  return out;
}

void MaskedLM::collect_parameters(const std::string& prefix, nn::NamedTensors& out) const {
  tokens_.collect_parameters(prefix + "embed.tokens.", out);
  positions_.collect_parameters(prefix + "embed.positions.", out);
  encoder_.collect_parameters(prefix + "encoder.", out);
  head_.collect_parameters(prefix + "lm_head.", out);
}

void MaskedLM::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["kind"] = "masked_lm";
  meta["config"] = cfg_;
  meta["vocab"] = vocab_.tokens();
  meta["lora"] = lora_ ? nlohmann::json(*lora_) : nlohmann::json();
  nn::save_checkpoint(path, named_parameters(), meta);
}

MaskedLM MaskedLM::load(const std::filesystem::path& path) {
  const nlohmann::json meta = nn::load_metadata(path);
  if (meta.value("kind", "") != "masked_lm") throw DataError(path.string() + " is not a language-model checkpoint");
  LmConfig cfg;
  read_config(meta.at("config"), cfg);
  nn::Rng rng(cfg.seed);
  MaskedLM model(cfg, Vocab::from_tokens(meta.at("vocab").get<std::vector<std::string>>()), rng);
  if (!meta.at("lora").is_null()) {
    LoraConfig lc;
    read_config(meta.at("lora"), lc);
    model.inject_lora(lc, rng);
  }
  nn::assign_parameters(model.named_parameters(), nn::load_tensors(path));
  return model;
}

std::size_t count_parameters(const nn::Module& model, bool trainable_only) {
  return model.parameter_count(trainable_only);
}

void MlmConfig::validate() const {
  if (epochs < 0 || batch_size < 1) throw UsageError("mlm: epochs must be >= 0 and batch_size >= 1");
  if (!(mask_prob > 0 && mask_prob < 1)) throw UsageError("mlm: mask_prob must be in (0, 1)");
  if (!(lr > 0) || warmup_ratio < 0 || warmup_ratio > 1) throw UsageError("mlm: bad learning-rate schedule");
}

void to_json(nlohmann::json& j, const MlmConfig& c) {
  j = {{"epochs", c.epochs},       {"batch_size", c.batch_size},     {"lr", c.lr},
       {"warmup_ratio", c.warmup_ratio}, {"weight_decay", c.weight_decay}, {"grad_clip", c.grad_clip},
       {"mask_prob", c.mask_prob}, {"seed", c.seed}};
}

void read_config(const nlohmann::json& j, MlmConfig& c) {
  ConfigReader r(j, "mlm");
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.get("warmup_ratio", c.warmup_ratio);
  r.get("weight_decay", c.weight_decay);
  r.get("grad_clip", c.grad_clip);
  r.get("mask_prob", c.mask_prob);
  r.get("seed", c.seed);
  r.finish();
}

std::vector<MlmEpoch> pretrain_mlm(MaskedLM& model, const std::vector<std::vector<int>>& sentences,
                                   const MlmConfig& cfg, const std::function<void(const MlmEpoch&)>& on_epoch) {
  cfg.validate();
  if (sentences.empty()) throw DataError("mlm pretraining corpus is empty");
  const Vocab& vocab = model.vocab();
  for (const auto& s : sentences) {
    if (s.empty()) throw DataError("mlm pretraining sentence is empty");
    if (static_cast<int>(s.size()) + 2 > model.config().max_positions) {
      throw DataError("mlm pretraining sentence longer than max_positions");
    }
  }
  nn::Rng rng(cfg.seed);
  nn::AdamW opt(model.parameters(true), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.grad_clip});
  const std::int64_t batches = (static_cast<std::int64_t>(sentences.size()) + cfg.batch_size - 1) / cfg.batch_size;
  nn::CosineSchedule schedule(cfg.lr, batches * cfg.epochs, cfg.warmup_ratio);
  std::bernoulli_distribution draw(cfg.mask_prob);

  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<MlmEpoch> log;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::int64_t count = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      std::vector<Index> ids, positions, lengths, masked_rows, targets;
      for (std::size_t b = b0; b < b1; ++b) {
        const auto& s = sentences[order[b]];
        const Index base = static_cast<Index>(ids.size());
        std::vector<Index> mine;
        ids.push_back(vocab.bos());
        for (std::size_t i = 0; i < s.size(); ++i) {
          ids.push_back(s[i]);
          if (draw(rng)) mine.push_back(static_cast<Index>(i) + 1);
        }
        ids.push_back(vocab.eos());
        if (mine.empty()) {
          std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
          mine.push_back(static_cast<Index>(pick(rng)) + 1);
        }
        for (Index m : mine) {
          masked_rows.push_back(base + m);
          targets.push_back(ids[base + m]);
          ids[base + m] = vocab.mask();
        }
        const Index len = static_cast<Index>(s.size()) + 2;
        for (Index p = 0; p < len; ++p) positions.push_back(p);
        lengths.push_back(len);
      }
      const auto layout = nn::SeqLayout::from_lengths(lengths);
      Tensor hidden = model.forward(model.embed(ids, positions), layout);
      Tensor loss = nn::cross_entropy(model.lm_logits(nn::gather_rows(hidden, masked_rows)), targets);
      if (!std::isfinite(loss.item())) throw NumericalError("mlm loss is not finite");
      loss.backward();
      opt.step(schedule.lr(opt.steps()));
      loss_sum += loss.item() * static_cast<double>(targets.size());
      count += static_cast<std::int64_t>(targets.size());
    }
    log.push_back({epoch, loss_sum / static_cast<double>(count)});
    if (on_epoch) on_epoch(log.back());
  }
  return log;
}

}  // namespace gesturelm::lm
