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
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gesturelm/alignment/pairing.hpp"
#include "gesturelm/lm/model.hpp"
#include "gesturelm/nn/module.hpp"

namespace gesturelm::alignment {

using nn::Index;
using nn::Matrix;
using nn::Tensor;

// Two dense layers with GELU between: in -> hidden -> out, row-wise.
class Projector : public nn::Module {
 public:
  Projector() = default;
  Projector(Index in, Index hidden, Index out, nn::Rng& rng);
  Tensor forward(const Tensor& x) const { return fc2_.forward(nn::gelu(fc1_.forward(x))); }
  Index in_features() const { return fc1_.in_features(); }
  Index hidden_features() const { return fc1_.out_features(); }
  Index out_features() const { return fc2_.out_features(); }
  void collect_parameters(const std::string& prefix, nn::NamedTensors& out) const override;

 private:
  nn::Linear fc1_, fc2_;
};

// h -> K logits over gesture ids.
class GestureHead : public nn::Module {
 public:
  GestureHead() = default;
  GestureHead(Index hidden, int classes, nn::Rng& rng) : fc_(hidden, classes, rng) {}
  Tensor forward(const Tensor& h) const { return fc_.forward(h); }
  int classes() const { return static_cast<int>(fc_.out_features()); }
  void collect_parameters(const std::string& prefix, nn::NamedTensors& out) const override {
    fc_.collect_parameters(prefix + "fc.", out);
  }

 private:
  nn::Linear fc_;
};

// Maps gesture ids to LM-width content embeddings (positions are added by
// the LM). Ids below K come from a table, BOG/EOG/GMASK from three learned
// rows. With a codebook source the table is the frozen tokenizer codebook
// followed by a projector; with a learned source the table is LM-width and
// trained directly.
class GestureEmbedder : public nn::Module {
 public:
  enum class Source { codebook, learned };

  GestureEmbedder() = default;
  static GestureEmbedder from_codebook(const Matrix& codebook, Index projector_hidden, Index width, nn::Rng& rng);
  static GestureEmbedder learned(int vocab, Index width, nn::Rng& rng);

  Source source() const { return source_; }
  int vocab() const { return static_cast<int>(table_.rows()); }
  Index width() const { return specials_.cols(); }
  const Tensor& table() const { return table_; }
  const Projector& projector() const { return projector_; }
  GestureEmbedder clone() const;

  // [n x width]; ids in [0, K + 3).
  Tensor content(std::span<const int> ids) const;

  // Projector and special rows (plus the table for a learned source).
  std::vector<Tensor> trainable() const;
  void collect_parameters(const std::string& prefix, nn::NamedTensors& out) const override;

 private:
  Source source_ = Source::codebook;
  Tensor table_;
  Projector projector_;
  Tensor specials_;
};

struct FaLoss {
  Tensor mlm, mgp, fa;
};
// Mean CE over masked text slots (full vocabulary) and masked gesture slots
// (K classes); an empty set contributes 0. fa = mgp + mlm. Throws
// NumericalError naming a non-finite term.
FaLoss fa_loss(const Tensor& text_logits, std::span<const Index> text_gold, const Tensor& gesture_logits,
               std::span<const Index> gesture_gold);

enum class AdversarialMode { none, random_normal, positional_only };
AdversarialMode parse_adversarial_mode(const std::string& s);
std::string to_string(AdversarialMode m);

struct GestureOverride {
  AdversarialMode mode = AdversarialMode::none;
  std::uint64_t seed = 0;
};

// Packed forward of several examples. Each example occupies its text slots
// followed by its gesture slots.
struct Encoded {
  Tensor hidden;
  nn::SeqLayout layout;
  std::vector<Index> text_offset;
  std::vector<Index> gesture_offset;
};
Encoded encode_batch(const lm::MaskedLM& lm, const GestureEmbedder* gestures,
                     std::span<const PairedExample* const> batch, const GestureOverride& override = {});

struct AlignConfig {
  double mask_text = 0.3;
  double mask_gesture = 0.3;
  int epochs = 20;
  int batch_size = 32;
  double lr = 1e-3;
  double warmup_ratio = 0.03;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  int patience = 3;            // epochs without validation improvement
  Index projector_hidden = 0;  // 0 -> LM width
  std::string positions = "shared";
  std::uint64_t seed = 0;

  void validate() const;
};
void to_json(nlohmann::json& j, const AlignConfig& c);
void read_config(const nlohmann::json& j, AlignConfig& c);

struct FaValues {
  double mlm = 0, mgp = 0, fa = 0;
};
void to_json(nlohmann::json& j, const FaValues& v);

struct AlignEpoch {
  int epoch = 0;
  FaValues train;
  FaValues val;
};

struct AlignResult {
  std::vector<AlignEpoch> log;
  int best_epoch = 0;
  FaValues best_val;
};

// Slot-weighted L_FA terms of `pairs` under fixed masks.
FaValues evaluate_fa(const lm::MaskedLM& lm, const GestureEmbedder& gestures, const GestureHead& head,
                     const std::vector<PairedExample>& masked_pairs, int batch_size = 64);

// Trains the projector, gesture head and gesture special rows with
// L_MGP + L_MLM while the LM (frozen here) and codebook stay fixed. Early
// stopping on validation L_FA (training L_FA when `val` is empty); the best
// epoch's parameters are restored.
AlignResult train_alignment(lm::MaskedLM& lm, GestureEmbedder& gestures, GestureHead& head,
                            const std::vector<PairedExample>& train, const std::vector<PairedExample>& val,
                            const AlignConfig& cfg, const std::function<void(const AlignEpoch&)>& on_epoch = {});

// Embedder + head checkpoint.
void save_alignment(const std::filesystem::path& path, const GestureEmbedder& gestures, const GestureHead& head,
                    const nlohmann::json& extra = {});
struct AlignmentModules {
  GestureEmbedder gestures;
  GestureHead head;
  nlohmann::json meta;
};
AlignmentModules load_alignment(const std::filesystem::path& path);

}  // namespace gesturelm::alignment
