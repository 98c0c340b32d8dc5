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

#include "gesturelm/infill/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gesturelm/config_reader.hpp"
#include "gesturelm/error.hpp"
#include "gesturelm/infill/metrics.hpp"
#include "gesturelm/nn/optim.hpp"

namespace gesturelm::infill {

namespace {

void check_labels(const LabelSet& labels, const lm::MaskedLM& lm) {
  if (labels.ids.size() != labels.markers.size()) throw UsageError("label set is not bound to the vocabulary");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.ids[i] < 0 || labels.ids[i] >= lm.vocab_size() || lm.vocab().token(labels.ids[i]) != labels.markers[i]) {
      throw UsageError("label '" + labels.markers[i] + "' does not match the LM vocabulary");
    }
  }
}

std::vector<nn::Index> label_cols(const LabelSet& labels) {
  return std::vector<nn::Index>(labels.ids.begin(), labels.ids.end());
}

nn::Tensor batch_label_logits(const lm::MaskedLM& lm, const GestureEmbedder* gestures,
                              std::span<const InfillExample* const> batch, const std::vector<nn::Index>& cols,
                              const GestureOverride& override) {
  std::vector<const alignment::PairedExample*> inputs;
  for (const auto* ex : batch) {
    if (ex->mask_slot < 0 || ex->mask_slot >= static_cast<int>(ex->input.text_ids.size()) ||
        ex->input.text_ids[ex->mask_slot] != lm.vocab().mask()) {
      throw UsageError("infill example '" + ex->id + "' has no <mask> at its mask slot");
    }
    inputs.push_back(&ex->input);
  }
  const auto enc = alignment::encode_batch(lm, gestures, inputs, override);
  std::vector<nn::Index> rows;
  for (std::size_t b = 0; b < batch.size(); ++b) rows.push_back(enc.text_offset[b] + batch[b]->mask_slot);
  return lm.lm_logits(nn::gather_rows(enc.hidden, rows), cols);
}

}  // namespace

nn::Matrix label_logits(const lm::MaskedLM& lm, const GestureEmbedder* gestures,
                        std::span<const InfillExample> examples, const LabelSet& labels,
                        const GestureOverride& override, int batch_size) {
  check_labels(labels, lm);
  nn::NoGradGuard no_grad;
  const auto cols = label_cols(labels);
  nn::Matrix out(static_cast<nn::Index>(examples.size()), static_cast<nn::Index>(cols.size()));
  std::vector<const InfillExample*> batch;
  for (std::size_t i = 0; i < examples.size(); i += batch_size) {
    batch.clear();
    for (std::size_t j = i; j < std::min(examples.size(), i + batch_size); ++j) batch.push_back(&examples[j]);
    out.middleRows(static_cast<nn::Index>(i), static_cast<nn::Index>(batch.size())) =
        batch_label_logits(lm, gestures, batch, cols, override).value();
  }
  return out;
}

int predict_marker(const nn::RowVector& logits) {
  if (logits.size() == 0) throw UsageError("no label logits");
  int best = 0;
  for (nn::Index i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = static_cast<int>(i);
  }
  return best;
}

int predict_marker(const lm::MaskedLM& lm, const GestureEmbedder* gestures, const InfillExample& example,
                   const LabelSet& labels, const GestureOverride& override) {
  return predict_marker(nn::RowVector(label_logits(lm, gestures, std::span(&example, 1), labels, override).row(0)));
}

std::vector<int> predict(const lm::MaskedLM& lm, const GestureEmbedder* gestures,
                         std::span<const InfillExample> examples, const LabelSet& labels,
                         const GestureOverride& override) {
  const nn::Matrix logits = label_logits(lm, gestures, examples, labels, override);
  std::vector<int> out;
  for (nn::Index r = 0; r < logits.rows(); ++r) out.push_back(predict_marker(nn::RowVector(logits.row(r))));
  return out;
}

void FinetuneConfig::validate() const {
  if (epochs < 0 || batch_size < 1 || patience < 1) {
    throw UsageError("finetune: epochs >= 0, batch_size >= 1, patience >= 1");
  }
  if (!(lr > 0) || warmup_ratio < 0 || warmup_ratio > 1) throw UsageError("finetune: bad learning-rate schedule");
  if (gesture_window < 0) throw UsageError("finetune: gesture_window must be >= 0");
  lora.validate();
}

void to_json(nlohmann::json& j, const FinetuneConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"lr", c.lr},
       {"warmup_ratio", c.warmup_ratio},
       {"weight_decay", c.weight_decay},
       {"grad_clip", c.grad_clip},
       {"patience", c.patience},
       {"gesture_window", c.gesture_window},
       {"lora", c.lora},
       {"seed", c.seed}};
}

void read_config(const nlohmann::json& j, FinetuneConfig& c) {
  ConfigReader r(j, "finetune");
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.get("warmup_ratio", c.warmup_ratio);
  r.get("weight_decay", c.weight_decay);
  r.get("grad_clip", c.grad_clip);
  r.get("patience", c.patience);
  r.get("gesture_window", c.gesture_window);
  lm::read_config(r.child("lora"), c.lora);
  r.get("seed", c.seed);
  r.finish();
}

FinetuneResult finetune(lm::MaskedLM& lm, GestureEmbedder* gestures, const std::vector<InfillExample>& train,
                        const std::vector<InfillExample>& val, const LabelSet& labels, const FinetuneConfig& cfg,
                        const GestureOverride& override, const std::function<void(const FinetuneEpoch&)>& on_epoch) {
  cfg.validate();
  check_labels(labels, lm);
  if (train.empty()) throw DataError("fine-tuning set is empty");
  for (const auto* set : {&train, &val}) {
    for (const auto& ex : *set) {
      if (ex.gold < 0 || ex.gold >= static_cast<int>(labels.size())) {
        throw DataError("example '" + ex.id + "' has a gold label outside the label set");
      }
    }
  }

  nn::Rng rng(cfg.seed);
  if (!lm.has_lora()) lm.inject_lora(cfg.lora, rng);
  std::vector<nn::Tensor> params = lm.parameters(true);
  if (gestures != nullptr) {
    gestures->set_trainable(false);
    if (gestures->source() == GestureEmbedder::Source::learned) {
      for (auto t : gestures->trainable()) {
        t.set_requires_grad(true);
        params.push_back(t);
      }
    }
  }
  nn::AdamW opt(params, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.grad_clip});
  const std::int64_t batches = (static_cast<std::int64_t>(train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  nn::CosineSchedule schedule(cfg.lr, batches * cfg.epochs, cfg.warmup_ratio);
  const auto cols = label_cols(labels);

  std::vector<std::string> names(labels.markers);
  std::vector<int> val_gold;
  for (const auto& ex : val) val_gold.push_back(ex.gold);

  FinetuneResult result;
  std::vector<nn::Matrix> best;
  double best_f1 = -1;
  int since_best = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const InfillExample*> batch;
  std::vector<nn::Index> gold;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    GestureOverride train_override = override;
    train_override.seed = override.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch));
    double loss_sum = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      batch.clear();
      gold.clear();
      for (std::size_t b = b0; b < std::min(order.size(), b0 + cfg.batch_size); ++b) {
        batch.push_back(&train[order[b]]);
        gold.push_back(train[order[b]].gold);
      }
      nn::Tensor loss = nn::cross_entropy(batch_label_logits(lm, gestures, batch, cols, train_override), gold);
      if (!std::isfinite(loss.item())) throw NumericalError("fine-tuning loss is not finite");
      loss.backward();
      opt.step(schedule.lr(opt.steps()));
      loss_sum += loss.item() * static_cast<double>(batch.size());
    }
    FinetuneEpoch log{epoch, loss_sum / static_cast<double>(train.size()), 0, 0};
    if (!val.empty()) {
      const EvalReport r = evaluate(val_gold, predict(lm, gestures, val, labels, override), names);
      log.val_accuracy = r.accuracy;
      log.val_f1 = r.macro_f1;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (val.empty() || log.val_f1 > best_f1) {
      best_f1 = log.val_f1;
      result.best_epoch = epoch;
      result.best_val_f1 = log.val_f1;
      best.clear();
      for (const auto& t : params) best.push_back(t.value());
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < best.size(); ++i) params[i].mutable_value() = best[i];
  return result;
}

}  // namespace gesturelm::infill
