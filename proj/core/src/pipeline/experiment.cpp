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

#include "gesturelm/pipeline/experiment.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "gesturelm/error.hpp"

namespace gesturelm::pipeline {

using data::Split;

std::vector<const Utterance*> Corpus::select(Split split, const std::string& task) const {
  std::vector<const Utterance*> out;
  for (const auto& u : utterances) {
    if (u.split == split && (task.empty() || u.task == task)) out.push_back(&u);
  }
  return out;
}

bool Corpus::has_motion() const {
  return !utterances.empty() && std::all_of(utterances.begin(), utterances.end(),
                                            [](const Utterance& u) { return u.motion.frames() > 0; });
}

Corpus load_corpus(const data::Manifest& manifest, const data::LoadOptions& options) {
  Corpus c;
  c.fps = options.fps > 0 ? options.fps : 0;
  c.report = data::stream_corpus(manifest, options, [&](data::CorpusItem&& item) {
    Utterance u;
    u.id = item.entry->id;
    u.task = item.entry->task;
    u.speaker = item.entry->speaker;
    u.split = item.entry->split;
    u.transcript = std::move(item.transcript);
    u.motion = std::move(item.motion);
    if (c.fps == 0 && u.motion.frames() > 0) c.fps = u.motion.fps();
    c.utterances.push_back(std::move(u));
  });
  if (c.fps == 0) c.fps = motion::kDefaultFps;
  return c;
}

Corpus synthetic_corpus(const data::SynthConfig& cfg) {
  cfg.validate();
  const auto motifs = data::motif_table(cfg);
  Corpus c;
  c.fps = cfg.fps;
  for (const auto& task : cfg.tasks) {
    for (int i = 0; i < cfg.train + cfg.val + cfg.test; ++i) {
      auto s = data::synthesize(cfg, task, i, motifs);
      Utterance u;
      u.id = s.entry.id;
      u.task = task;
      u.speaker = s.entry.speaker;
      u.split = s.entry.split;
      u.transcript = std::move(s.transcript);
      u.motion = std::move(s.motion);
      c.utterances.push_back(std::move(u));
      ++c.report.loaded;
    }
  }
  return c;
}

std::vector<motion::MotionSequence> tokenizer_windows(const Corpus& corpus, Split split, int window,
                                                      std::size_t max_windows, std::uint64_t seed) {
  std::vector<motion::MotionSequence> out;
  for (const auto* u : corpus.select(split)) {
    if (u->motion.frames() == 0) throw UsageError("utterance '" + u->id + "' has no motion");
    for (auto& w : tokenizer::windows_of(u->motion, window)) out.push_back(std::move(w));
  }
  if (max_windows > 0 && out.size() > max_windows) {
    std::mt19937_64 rng(seed);
    std::shuffle(out.begin(), out.end(), rng);
    out.resize(max_windows);
  }
  return out;
}

void tokenize_corpus(Corpus& corpus, const tokenizer::VqVae& model) {
  for (auto& u : corpus.utterances) {
    if (u.motion.frames() == 0) throw UsageError("utterance '" + u.id + "' has no motion");
    u.vq = tokenizer::tokenize(u.motion, model);
  }
}

void grid_tokenize_corpus(Corpus& corpus, const motion::Skeleton& skeleton, const tokenizer::GridSpec& grid,
                          int frames_per_token, int window) {
  for (auto& u : corpus.utterances) {
    if (u.motion.frames() == 0) throw UsageError("utterance '" + u.id + "' has no motion");
    u.grid = tokenizer::grid_token_seq(u.motion, skeleton, grid, frames_per_token, window);
  }
}

lm::Vocab corpus_vocab(const Corpus& corpus, const std::vector<std::string>& tasks) {
  std::vector<std::string> required;
  for (const auto& task : tasks) {
    for (const auto& m : infill::LabelSet::defaults(task).markers) required.push_back(m);
  }
  std::vector<std::string> texts;
  for (const auto* u : corpus.select(Split::train)) texts.push_back(u->transcript.text());
  return lm::build_vocab(texts, required);
}

std::vector<std::vector<int>> mlm_sentences(const Corpus& corpus, Split split, const lm::Vocab& vocab) {
  std::vector<std::vector<int>> out;
  for (const auto* u : corpus.select(split)) {
    auto ids = lm::encode_text(u->transcript.text(), vocab);
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  return out;
}

namespace {

const tokenizer::GestureTokenSeq& tokens_of(const Utterance& u, TokenSource source) {
  const auto& t = source == TokenSource::vq ? u.vq : u.grid;
  if (t.ids.empty()) {
    throw UsageError("utterance '" + u.id + "' has no " + (source == TokenSource::vq ? "VQ" : "grid") + " tokens");
  }
  return t;
}

}  // namespace

std::vector<alignment::PairedExample> paired_examples(const Corpus& corpus, Split split, const lm::Vocab& vocab,
                                                      TokenSource source, int gesture_vocab,
                                                      const alignment::PairOptions& options) {
  std::vector<alignment::PairedExample> out;
  for (const auto* u : corpus.select(split)) {
    out.push_back(alignment::build_pair(u->transcript, tokens_of(*u, source), corpus.fps, vocab, gesture_vocab,
                                        options));
  }
  return out;
}

TaskData build_task(const Corpus& corpus, const std::string& task, const lm::Vocab& vocab,
                    const TaskOptions& options) {
  const bool tagged = std::any_of(corpus.utterances.begin(), corpus.utterances.end(),
                                  [](const Utterance& u) { return !u.task.empty(); });
  const std::string filter = tagged ? task : "";
  TaskData d;
  const infill::LabelSet all = options.labels ? *options.labels : infill::LabelSet::defaults(task);
  std::vector<alignment::TimedTranscript> train_texts;
  for (const auto* u : corpus.select(Split::train, filter)) train_texts.push_back(u->transcript);
  d.train_counts = infill::count_markers(train_texts, all);
  d.labels = infill::frequency_filter(all, d.train_counts, options.threshold);
  d.labels.bind(vocab);

  for (Split split : {Split::train, Split::val, Split::test}) {
    auto& out = split == Split::train ? d.train : split == Split::val ? d.val : d.test;
    for (const auto* u : corpus.select(split, filter)) {
      const auto occurrences = infill::find_markers(u->transcript, d.labels);
      if (occurrences.empty()) continue;
      const auto pair = options.gestures ? alignment::build_pair(u->transcript, tokens_of(*u, options.source),
                                                                 corpus.fps, vocab, options.gesture_vocab, options.pair)
                                         : alignment::text_example(u->transcript, vocab, options.pair.splitter);
      for (std::size_t k = 0; k < occurrences.size(); ++k) {
        auto ex = infill::build_infill_example(pair, occurrences[k], d.labels);
        ex.id = occurrences.size() == 1 ? u->id : u->id + "#" + std::to_string(k);
        ex.input.id = ex.id;
        if (options.gestures && options.window > 0) ex = infill::restrict_gesture_window(ex, options.window);
        out.push_back(std::move(ex));
      }
    }
  }
  return d;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"text_only",       "gesture",     "gesture_no_fa",
                                                 "gesture_abs_pos", "grid_tokens", "codebook_indices"};
  return names;
}

Variant parse_variant(const std::string& s) {
  const auto& names = variant_names();
  auto it = std::find(names.begin(), names.end(), s);
  if (it == names.end()) throw UsageError("unknown variant '" + s + "'");
  return static_cast<Variant>(it - names.begin());
}

std::string to_string(Variant v) { return variant_names()[static_cast<std::size_t>(v)]; }

bool uses_gestures(Variant v) { return v != Variant::text_only; }

TokenSource token_source(Variant v) { return v == Variant::grid_tokens ? TokenSource::grid : TokenSource::vq; }

alignment::PositionScheme position_scheme(Variant v) {
  return v == Variant::gesture_abs_pos ? alignment::PositionScheme::sequential : alignment::PositionScheme::shared;
}

namespace {

void check_examples(Variant variant, const TaskData& task) {
  for (const auto* set : {&task.train, &task.val, &task.test}) {
    for (const auto& ex : *set) {
      if (ex.input.has_gestures() != uses_gestures(variant)) {
        throw UsageError("variant " + to_string(variant) + " does not match the examples of '" + ex.id + "'");
      }
    }
  }
}

void check_override(Variant variant, const alignment::GestureOverride& override) {
  if (variant == Variant::text_only && override.mode != alignment::AdversarialMode::none) {
    throw UsageError("adversarial modes need a gesture pipeline");
  }
}

}  // namespace

FinetunedModel finetune_variant(Variant variant, const TaskData& task, const VariantResources& res,
                                const infill::FinetuneConfig& cfg, const alignment::GestureOverride& override,
                                const std::function<void(const infill::FinetuneEpoch&)>& on_epoch) {
  if (res.lm == nullptr) throw UsageError("no language model for fine-tuning");
  check_override(variant, override);
  check_examples(variant, task);
  FinetunedModel r{res.lm->clone(), std::nullopt, {}};
  const nn::Index width = r.model.config().hidden;
  nn::Rng rng(cfg.seed ^ 0x67657374ull);
  auto require = [&](const void* p, const char* what) {
    if (p == nullptr) throw UsageError("variant " + to_string(variant) + " needs " + what);
  };
  switch (variant) {
    case Variant::text_only:
      break;
    case Variant::gesture:
      require(res.aligned, "an alignment checkpoint");
      r.gestures = res.aligned->clone();
      break;
    case Variant::gesture_abs_pos:
      require(res.aligned_sequential, "an alignment checkpoint trained with sequential positions");
      r.gestures = res.aligned_sequential->clone();
      break;
    case Variant::gesture_no_fa:
      require(res.codebook, "a tokenizer codebook");
      r.gestures = alignment::GestureEmbedder::from_codebook(*res.codebook, res.projector_hidden, width, rng);
      break;
    case Variant::codebook_indices:
      require(res.codebook, "a tokenizer codebook");
      r.gestures = alignment::GestureEmbedder::learned(static_cast<int>(res.codebook->rows()), width, rng);
      break;
    case Variant::grid_tokens:
      if (res.grid_cells < 1) throw UsageError("variant grid_tokens needs a grid size");
      r.gestures = alignment::GestureEmbedder::learned(res.grid_cells, width, rng);
      break;
  }
  r.training = infill::finetune(r.model, r.gestures ? &*r.gestures : nullptr, task.train, task.val, task.labels, cfg,
                                override, on_epoch);
  return r;
}

infill::EvalReport evaluate_variant(const lm::MaskedLM& model, const alignment::GestureEmbedder* gestures,
                                    Variant variant, const TaskData& task, std::uint64_t seed,
                                    const alignment::GestureOverride& override) {
  check_override(variant, override);
  check_examples(variant, task);
  if (uses_gestures(variant) && gestures == nullptr) throw UsageError("gesture variant evaluated without embedder");
  std::vector<int> gold;
  for (const auto& ex : task.test) gold.push_back(ex.gold);
  auto report = infill::evaluate(gold, infill::predict(model, gestures, task.test, task.labels, override),
                                 task.labels.markers);
  report.task = task.labels.task;
  report.variant = to_string(variant);
  if (override.mode != alignment::AdversarialMode::none) report.variant += "+" + alignment::to_string(override.mode);
  report.seed = seed;
  return report;
}

RunResult run_variant(Variant variant, const TaskData& task, const VariantResources& res,
                      const infill::FinetuneConfig& cfg, const alignment::GestureOverride& override,
                      const std::function<void(const infill::FinetuneEpoch&)>& on_epoch) {
  auto tuned = finetune_variant(variant, task, res, cfg, override, on_epoch);
  const auto* g = tuned.gestures ? &*tuned.gestures : nullptr;
  auto report = evaluate_variant(tuned.model, g, variant, task, cfg.seed, override);
  return {std::move(report), std::move(tuned)};
}

std::vector<MaskingPoint> masking_sweep(const lm::MaskedLM& lm, const nn::Matrix& codebook,
                                        const std::vector<alignment::PairedExample>& train,
                                        const std::vector<alignment::PairedExample>& val,
                                        const alignment::AlignConfig& base, const std::vector<double>& rates,
                                        double eval_rate) {
  std::vector<MaskingPoint> out;
  for (double rate : rates) {
    auto frozen = lm.clone();
    nn::Rng rng(base.seed);
    const nn::Index width = frozen.config().hidden;
    auto g = alignment::GestureEmbedder::from_codebook(codebook, base.projector_hidden, width, rng);
    alignment::GestureHead head(width, static_cast<int>(codebook.rows()), rng);
    auto cfg = base;
    cfg.mask_text = cfg.mask_gesture = rate;
    const auto result = alignment::train_alignment(frozen, g, head, train, val, cfg);
    MaskingPoint p{rate, result.best_val};
    if (eval_rate > 0) {
      std::mt19937_64 mrng(base.seed ^ 0x6d61736bull);
      std::vector<alignment::PairedExample> masked;
      for (const auto& e : val) masked.push_back(alignment::mask_tokens(e, eval_rate, eval_rate, mrng));
      p.val = alignment::evaluate_fa(frozen, g, head, masked);
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace gesturelm::pipeline
