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

#include "gesturelm/alignment/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "gesturelm/config_reader.hpp"
#include "gesturelm/error.hpp"
#include "gesturelm/nn/checkpoint.hpp"
#include "gesturelm/nn/optim.hpp"

namespace gesturelm::alignment {

Projector::Projector(Index in, Index hidden, Index out, nn::Rng& rng) : fc1_(in, hidden, rng), fc2_(hidden, out, rng) {}

void Projector::collect_parameters(const std::string& prefix, nn::NamedTensors& out) const {
  fc1_.collect_parameters(prefix + "fc1.", out);
  fc2_.collect_parameters(prefix + "fc2.", out);
}

GestureEmbedder GestureEmbedder::from_codebook(const Matrix& codebook, Index projector_hidden, Index width,
                                               nn::Rng& rng) {
  if (codebook.rows() < 1) throw UsageError("empty codebook");
  GestureEmbedder g;
  g.source_ = Source::codebook;
  g.table_ = Tensor(codebook, false);
  g.projector_ = Projector(codebook.cols(), projector_hidden > 0 ? projector_hidden : width, width, rng);
  g.specials_ = Tensor(nn::normal_matrix(3, width, 0.02, rng), true);
  return g;
}

GestureEmbedder GestureEmbedder::learned(int vocab, Index width, nn::Rng& rng) {
  if (vocab < 1) throw UsageError("gesture vocabulary size must be positive");
  GestureEmbedder g;
  g.source_ = Source::learned;
  g.table_ = Tensor(nn::normal_matrix(vocab, width, 0.02, rng), true);
  g.specials_ = Tensor(nn::normal_matrix(3, width, 0.02, rng), true);
  return g;
}

GestureEmbedder GestureEmbedder::clone() const {
  nn::Rng rng(0);
  GestureEmbedder copy = source_ == Source::codebook
                             ? from_codebook(table_.value(), projector_.hidden_features(), width(), rng)
                             : learned(vocab(), width(), rng);
  copy.copy_state_from(*this);
  return copy;
}

Tensor GestureEmbedder::content(std::span<const int> ids) const {
  const int K = vocab();
  std::vector<Index> table_rows, special_rows;
  std::vector<nn::RowRef> refs;
  refs.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= K + 3) throw UsageError("gesture id " + std::to_string(id) + " out of range");
    if (id < K) {
      refs.push_back({0, static_cast<Index>(table_rows.size())});
      table_rows.push_back(id);
    } else {
      refs.push_back({1, static_cast<Index>(special_rows.size())});
      special_rows.push_back(id - K);
    }
  }
  Tensor body = nn::gather_rows(table_, table_rows);
  if (source_ == Source::codebook) body = projector_.forward(body);
  return nn::assemble_rows({body, nn::gather_rows(specials_, special_rows)}, refs);
}

std::vector<Tensor> GestureEmbedder::trainable() const {
  std::vector<Tensor> out;
  if (source_ == Source::codebook) out = projector_.parameters();
  out.push_back(specials_);
  if (source_ == Source::learned) out.push_back(table_);
  return out;
}

void GestureEmbedder::collect_parameters(const std::string& prefix, nn::NamedTensors& out) const {
  out.emplace_back(prefix + "table", table_);
  if (source_ == Source::codebook) projector_.collect_parameters(prefix + "projector.", out);
  out.emplace_back(prefix + "specials", specials_);
}

namespace {

void require_finite(const Tensor& t, const char* name) {
  if (!std::isfinite(t.item())) throw NumericalError(std::string("alignment loss term '") + name + "' is not finite");
}

}  // namespace

FaLoss fa_loss(const Tensor& text_logits, std::span<const Index> text_gold, const Tensor& gesture_logits,
               std::span<const Index> gesture_gold) {
  FaLoss l;
  l.mlm = text_gold.empty() ? Tensor::scalar(0.0) : nn::cross_entropy(text_logits, text_gold);
  l.mgp = gesture_gold.empty() ? Tensor::scalar(0.0) : nn::cross_entropy(gesture_logits, gesture_gold);
  require_finite(l.mlm, "L_MLM");
  require_finite(l.mgp, "L_MGP");
  l.fa = nn::add(l.mgp, l.mlm);
  return l;
}

AdversarialMode parse_adversarial_mode(const std::string& s) {
  if (s == "none") return AdversarialMode::none;
  if (s == "random_normal") return AdversarialMode::random_normal;
  if (s == "positional_only") return AdversarialMode::positional_only;
  throw UsageError("unknown adversarial mode '" + s + "' (expected none, random_normal or positional_only)");
}

std::string to_string(AdversarialMode m) {
  switch (m) {
    case AdversarialMode::none: return "none";
    case AdversarialMode::random_normal: return "random_normal";
    case AdversarialMode::positional_only: return "positional_only";
  }
  return "none";
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Encoded encode_batch(const lm::MaskedLM& lm, const GestureEmbedder* gestures,
                     std::span<const PairedExample* const> batch, const GestureOverride& override) {
  if (batch.empty()) throw UsageError("encode_batch: empty batch");
  std::vector<Index> text_ids, text_pos, g_pos, lengths;
  std::vector<int> g_ids;
  bool any_gesture = false;
  for (const PairedExample* ex : batch) {
    if (ex->text_ids.size() != ex->text_positions.size() || ex->gesture_ids.size() != ex->gesture_positions.size()) {
      throw UsageError("example '" + ex->id + "' has mismatched ids and positions");
    }
    for (std::size_t i = 0; i < ex->text_ids.size(); ++i) {
      text_ids.push_back(ex->text_ids[i]);
      text_pos.push_back(ex->text_positions[i]);
    }
    for (std::size_t i = 0; i < ex->gesture_ids.size(); ++i) {
      g_ids.push_back(ex->gesture_ids[i]);
      g_pos.push_back(ex->gesture_positions[i]);
    }
    any_gesture = any_gesture || ex->has_gestures();
    lengths.push_back(static_cast<Index>(ex->slots()));
  }
  if (any_gesture && gestures == nullptr) throw UsageError("gesture slots present but no gesture embedder given");
  if (!any_gesture && override.mode != AdversarialMode::none) {
    throw UsageError("adversarial gesture swap applied to a text-only pipeline");
  }

  Encoded enc;
  enc.layout = nn::SeqLayout::from_lengths(lengths);
  std::vector<Tensor> sources{lm.embed(text_ids, text_pos)};
  if (any_gesture) {
    if (gestures->width() != lm.hidden()) throw UsageError("gesture embedder width differs from the LM width");
    Tensor content = gestures->content(g_ids);
    if (override.mode != AdversarialMode::none) {
      // replace interior rows; specials keep their learned content
      const int K = gestures->vocab();
      Matrix replacement = Matrix::Zero(content.rows(), content.cols());
      std::vector<nn::RowRef> refs;
      Index row = 0;
      for (const PairedExample* ex : batch) {
        std::seed_seq seq{static_cast<std::uint32_t>(override.seed), static_cast<std::uint32_t>(override.seed >> 32),
                          static_cast<std::uint32_t>(fnv1a(ex->id)), static_cast<std::uint32_t>(fnv1a(ex->id) >> 32)};
        nn::Rng rng(seq);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t i = 0; i < ex->gesture_ids.size(); ++i, ++row) {
          const int id = ex->gesture_ids[i];
          const bool interior = id < K || id == tokenizer::gmask_id(K);
          if (!interior) {
            refs.push_back({0, row});
            continue;
          }
          if (override.mode == AdversarialMode::random_normal) {
            for (Index c = 0; c < replacement.cols(); ++c) replacement(row, c) = normal(rng);
          }
          refs.push_back({1, row});
        }
      }
      content = nn::assemble_rows({content, Tensor(std::move(replacement))}, refs);
    }
    sources.push_back(nn::add(content, lm.embed_positions(g_pos)));
  }

  std::vector<nn::RowRef> refs;
  Index t = 0, g = 0;
  for (const PairedExample* ex : batch) {
    enc.text_offset.push_back(static_cast<Index>(refs.size()));
    for (std::size_t i = 0; i < ex->text_ids.size(); ++i) refs.push_back({0, t++});
    enc.gesture_offset.push_back(static_cast<Index>(refs.size()));
    for (std::size_t i = 0; i < ex->gesture_ids.size(); ++i) refs.push_back({1, g++});
  }
  Tensor emb = any_gesture ? nn::assemble_rows(sources, refs) : sources.front();
  enc.hidden = lm.forward(emb, enc.layout);
  return enc;
}

void AlignConfig::validate() const {
  if (!(mask_text >= 0 && mask_text < 1) || !(mask_gesture >= 0 && mask_gesture < 1)) {
    throw UsageError("align: masking probabilities must lie in [0, 1)");
  }
  if (epochs < 0 || batch_size < 1 || patience < 1) throw UsageError("align: epochs >= 0, batch_size >= 1, patience >= 1");
  if (!(lr > 0) || warmup_ratio < 0 || warmup_ratio > 1) throw UsageError("align: bad learning-rate schedule");
  parse_position_scheme(positions);
}

void to_json(nlohmann::json& j, const AlignConfig& c) {
  j = {{"mask_text", c.mask_text},
       {"mask_gesture", c.mask_gesture},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"lr", c.lr},
       {"warmup_ratio", c.warmup_ratio},
       {"weight_decay", c.weight_decay},
       {"grad_clip", c.grad_clip},
       {"patience", c.patience},
       {"projector_hidden", c.projector_hidden},
       {"positions", c.positions},
       {"seed", c.seed}};
}

void read_config(const nlohmann::json& j, AlignConfig& c) {
  ConfigReader r(j, "align");
  r.get("mask_text", c.mask_text);
  r.get("mask_gesture", c.mask_gesture);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.get("warmup_ratio", c.warmup_ratio);
  r.get("weight_decay", c.weight_decay);
  r.get("grad_clip", c.grad_clip);
  r.get("patience", c.patience);
  r.get("projector_hidden", c.projector_hidden);
  r.get("positions", c.positions);
  r.get("seed", c.seed);
  r.finish();
}

void to_json(nlohmann::json& j, const FaValues& v) { j = {{"L_MLM", v.mlm}, {"L_MGP", v.mgp}, {"L_FA", v.fa}}; }

namespace {

struct BatchLoss {
  FaLoss loss;
  Index text_count = 0;
  Index gesture_count = 0;
};

BatchLoss batch_loss(const lm::MaskedLM& lm, const GestureEmbedder& gestures, const GestureHead& head,
                     std::span<const PairedExample* const> batch) {
  Encoded enc = encode_batch(lm, &gestures, batch);
  std::vector<Index> t_rows, t_gold, g_rows, g_gold;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const PairedExample& ex = *batch[b];
    for (std::size_t i = 0; i < ex.text_gold.size(); ++i) {
      if (ex.text_gold[i] >= 0) {
        t_rows.push_back(enc.text_offset[b] + static_cast<Index>(i));
        t_gold.push_back(ex.text_gold[i]);
      }
    }
    for (std::size_t i = 0; i < ex.gesture_gold.size(); ++i) {
      if (ex.gesture_gold[i] >= 0) {
        g_rows.push_back(enc.gesture_offset[b] + static_cast<Index>(i));
        g_gold.push_back(ex.gesture_gold[i]);
      }
    }
  }
  Tensor t_logits = t_rows.empty() ? Tensor() : lm.lm_logits(nn::gather_rows(enc.hidden, t_rows));
  Tensor g_logits = g_rows.empty() ? Tensor() : head.forward(nn::gather_rows(enc.hidden, g_rows));
  return {fa_loss(t_logits, t_gold, g_logits, g_gold), static_cast<Index>(t_gold.size()),
          static_cast<Index>(g_gold.size())};
}

struct FaAccumulator {
  double mlm = 0, mgp = 0, fa = 0;
  double t = 0, g = 0, batches = 0;
  void add(const BatchLoss& b) {
    mlm += b.loss.mlm.item() * static_cast<double>(b.text_count);
    mgp += b.loss.mgp.item() * static_cast<double>(b.gesture_count);
    fa += b.loss.fa.item();
    t += static_cast<double>(b.text_count);
    g += static_cast<double>(b.gesture_count);
    batches += 1;
  }
  // Slot-weighted means; L_FA is their sum.
  FaValues values() const {
    FaValues v;
    v.mlm = t > 0 ? mlm / t : 0.0;
    v.mgp = g > 0 ? mgp / g : 0.0;
    v.fa = v.mlm + v.mgp;
    return v;
  }
};

}  // namespace

FaValues evaluate_fa(const lm::MaskedLM& lm, const GestureEmbedder& gestures, const GestureHead& head,
                     const std::vector<PairedExample>& masked_pairs, int batch_size) {
  nn::NoGradGuard no_grad;
  FaAccumulator acc;
  std::vector<const PairedExample*> batch;
  for (std::size_t i = 0; i < masked_pairs.size(); i += batch_size) {
    batch.clear();
    for (std::size_t j = i; j < std::min(masked_pairs.size(), i + batch_size); ++j) batch.push_back(&masked_pairs[j]);
    acc.add(batch_loss(lm, gestures, head, batch));
  }
  return acc.values();
}

AlignResult train_alignment(lm::MaskedLM& lm, GestureEmbedder& gestures, GestureHead& head,
                            const std::vector<PairedExample>& train, const std::vector<PairedExample>& val,
                            const AlignConfig& cfg, const std::function<void(const AlignEpoch&)>& on_epoch) {
  cfg.validate();
  if (train.empty()) throw DataError("alignment training set is empty");
  for (const auto& p : train) {
    if (!p.has_gestures()) throw DataError("alignment example '" + p.id + "' has no gesture block");
    if (p.gesture_vocab != gestures.vocab()) throw DataError("alignment example gesture vocabulary mismatch");
  }
  if (head.classes() != gestures.vocab()) throw UsageError("gesture head size differs from the gesture vocabulary");
  lm.set_trainable(false);

  std::vector<Tensor> params = gestures.trainable();
  for (const auto& t : head.parameters()) params.push_back(t);
  for (auto& t : params) t.set_requires_grad(true);

  nn::Rng rng(cfg.seed);
  nn::Rng val_rng(cfg.seed ^ 0x5bd1e995ull);
  std::vector<PairedExample> val_masked;
  for (const auto& p : val) val_masked.push_back(mask_tokens(p, cfg.mask_text, cfg.mask_gesture, val_rng));

  nn::AdamW opt(params, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.grad_clip});
  const std::int64_t batches = (static_cast<std::int64_t>(train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  nn::CosineSchedule schedule(cfg.lr, batches * cfg.epochs, cfg.warmup_ratio);

  AlignResult result;
  std::vector<Matrix> best;
  double best_score = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PairedExample> masked;
  std::vector<const PairedExample*> batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    FaAccumulator acc;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      masked.clear();
      batch.clear();
      for (std::size_t b = b0; b < std::min(order.size(), b0 + cfg.batch_size); ++b) {
        masked.push_back(mask_tokens(train[order[b]], cfg.mask_text, cfg.mask_gesture, rng));
      }
      for (const auto& m : masked) batch.push_back(&m);
      BatchLoss l = batch_loss(lm, gestures, head, batch);
      if (l.loss.fa.requires_grad()) l.loss.fa.backward();
      opt.step(schedule.lr(opt.steps()));
      acc.add(l);
    }
    AlignEpoch log{epoch, acc.values(), {}};
    log.val = val_masked.empty() ? log.train : evaluate_fa(lm, gestures, head, val_masked);
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.val.fa < best_score) {
      best_score = log.val.fa;
      result.best_epoch = epoch;
      result.best_val = log.val;
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

void save_alignment(const std::filesystem::path& path, const GestureEmbedder& gestures, const GestureHead& head,
                    const nlohmann::json& extra) {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["kind"] = "alignment";
  meta["source"] = gestures.source() == GestureEmbedder::Source::codebook ? "codebook" : "learned";
  meta["vocab"] = gestures.vocab();
  meta["width"] = gestures.width();
  meta["table_width"] = gestures.table().cols();
  meta["projector_hidden"] =
      gestures.source() == GestureEmbedder::Source::codebook ? gestures.projector().parameters()[0].cols() : 0;
  nn::NamedTensors tensors = gestures.named_parameters("gestures.");
  head.collect_parameters("head.", tensors);
  nn::save_checkpoint(path, tensors, meta);
}

AlignmentModules load_alignment(const std::filesystem::path& path) {
  AlignmentModules m;
  m.meta = nn::load_metadata(path);
  if (m.meta.value("kind", "") != "alignment") throw DataError(path.string() + " is not an alignment checkpoint");
  const int K = m.meta.at("vocab").get<int>();
  const Index width = m.meta.at("width").get<Index>();
  nn::Rng rng(0);
  if (m.meta.at("source").get<std::string>() == "codebook") {
    m.gestures = GestureEmbedder::from_codebook(Matrix::Zero(K, m.meta.at("table_width").get<Index>()),
                                                m.meta.at("projector_hidden").get<Index>(), width, rng);
  } else {
    m.gestures = GestureEmbedder::learned(K, width, rng);
  }
  m.head = GestureHead(width, K, rng);
  nn::NamedTensors tensors = m.gestures.named_parameters("gestures.");
  m.head.collect_parameters("head.", tensors);
  nn::assign_parameters(tensors, nn::load_tensors(path));
  return m;
}

}  // namespace gesturelm::alignment
