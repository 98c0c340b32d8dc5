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
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "gesturelm/alignment/model.hpp"
#include "gesturelm/infill/task.hpp"
#include "gesturelm/lm/model.hpp"

namespace gesturelm::infill {

using alignment::GestureEmbedder;
using alignment::GestureOverride;

// [n x |labels|] LM-head logits at each example's <mask> slot, restricted
// to the label ids (labels must be bound to the LM vocabulary).
nn::Matrix label_logits(const lm::MaskedLM& lm, const GestureEmbedder* gestures,
                        std::span<const InfillExample> examples, const LabelSet& labels,
                        const GestureOverride& override = {}, int batch_size = 64);

// Argmax over one row of label logits; ties go to the earlier label.
int predict_marker(const nn::RowVector& logits);
int predict_marker(const lm::MaskedLM& lm, const GestureEmbedder* gestures, const InfillExample& example,
                   const LabelSet& labels, const GestureOverride& override = {});
std::vector<int> predict(const lm::MaskedLM& lm, const GestureEmbedder* gestures,
                         std::span<const InfillExample> examples, const LabelSet& labels,
                         const GestureOverride& override = {});

struct FinetuneConfig {
  int epochs = 10;
  int batch_size = 16;
  double lr = 1e-3;
  double warmup_ratio = 0.03;
  double weight_decay = 1e-3;
  double grad_clip = 1.0;
  int patience = 3;        // epochs without validation F1 improvement
  int gesture_window = 0;  // 0 -> whole utterance
  lm::LoraConfig lora;
  std::uint64_t seed = 0;

  void validate() const;
};
void to_json(nlohmann::json& j, const FinetuneConfig& c);
void read_config(const nlohmann::json& j, FinetuneConfig& c);

struct FinetuneEpoch {
  int epoch = 0;
  double train_loss = 0;
  double val_accuracy = 0;
  double val_f1 = 0;
};

struct FinetuneResult {
  std::vector<FinetuneEpoch> log;
  int best_epoch = 0;
  double best_val_f1 = 0;
};

// Injects LoRA adapters (seeded by cfg.seed) unless present and trains them
// with cross-entropy over the label subset at the <mask> slot. Everything
// else stays frozen, except a learned gesture table (index-embedding
// variants), which trains with the adapters. Early stopping on validation
// macro F1 restores the best epoch's parameters. A random_normal override
// draws fresh vectors every epoch during training.
FinetuneResult finetune(lm::MaskedLM& lm, GestureEmbedder* gestures, const std::vector<InfillExample>& train,
                        const std::vector<InfillExample>& val, const LabelSet& labels, const FinetuneConfig& cfg,
                        const GestureOverride& override = {},
                        const std::function<void(const FinetuneEpoch&)>& on_epoch = {});

}  // namespace gesturelm::infill
