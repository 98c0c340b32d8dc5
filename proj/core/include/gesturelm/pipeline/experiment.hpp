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

// Stage orchestration shared by the command-line tool and the acceptance
// harness: corpus loading, tokenization, LM/alignment training and the
// fine-tuning variants.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gesturelm/alignment/model.hpp"
#include "gesturelm/alignment/pairing.hpp"
#include "gesturelm/data/corpus.hpp"
#include "gesturelm/data/synthetic.hpp"
#include "gesturelm/infill/finetune.hpp"
#include "gesturelm/infill/metrics.hpp"
#include "gesturelm/infill/task.hpp"
#include "gesturelm/lm/model.hpp"
#include "gesturelm/tokenizer/grid.hpp"
#include "gesturelm/tokenizer/vqvae.hpp"

namespace gesturelm::pipeline {

struct Utterance {
  std::string id;
  std::string task;
  std::string speaker;
  data::Split split = data::Split::train;
  alignment::TimedTranscript transcript;
  motion::MotionSequence motion;  // empty for transcript-only corpora
  tokenizer::GestureTokenSeq vq;    // filled by tokenize_corpus
  tokenizer::GestureTokenSeq grid;  // filled by grid_tokenize_corpus
};

struct Corpus {
  double fps = motion::kDefaultFps;
  std::vector<Utterance> utterances;
  data::LoadReport report;

  std::vector<const Utterance*> select(data::Split split, const std::string& task = "") const;
  bool has_motion() const;
};

Corpus load_corpus(const data::Manifest& manifest, const data::LoadOptions& options);
// Same utterances as generate_synthetic, kept in memory.
Corpus synthetic_corpus(const data::SynthConfig& cfg);

// Padded N-frame windows of the split's utterances in corpus order,
// subsampled (seeded) to at most max_windows when max_windows > 0.
std::vector<motion::MotionSequence> tokenizer_windows(const Corpus& corpus, data::Split split, int window,
                                                      std::size_t max_windows, std::uint64_t seed);
void tokenize_corpus(Corpus& corpus, const tokenizer::VqVae& model);
void grid_tokenize_corpus(Corpus& corpus, const motion::Skeleton& skeleton, const tokenizer::GridSpec& grid,
                          int frames_per_token, int window);

// Training-split words plus every marker of the given tasks.
lm::Vocab corpus_vocab(const Corpus& corpus, const std::vector<std::string>& tasks);
std::vector<std::vector<int>> mlm_sentences(const Corpus& corpus, data::Split split, const lm::Vocab& vocab);

enum class TokenSource { vq, grid };

std::vector<alignment::PairedExample> paired_examples(const Corpus& corpus, data::Split split, const lm::Vocab& vocab,
                                                      TokenSource source, int gesture_vocab,
                                                      const alignment::PairOptions& options = {});

struct TaskOptions {
  long threshold = 30;
  int window = 0;              // gesture context around the mask (0: whole utterance)
  bool gestures = true;        // false: text-only examples, gesture tokens untouched
  TokenSource source = TokenSource::vq;
  int gesture_vocab = 0;
  alignment::PairOptions pair;
  std::optional<infill::LabelSet> labels;  // default: the task's built-in list
};

struct TaskData {
  infill::LabelSet labels;           // after the frequency filter, bound to the vocabulary
  std::vector<long> train_counts;    // per marker of the unfiltered list
  std::vector<infill::InfillExample> train, val, test;
};

// One example per marker occurrence in the task's utterances (all
// utterances when the corpus has no task tags). Markers are counted on the
// training split only.
TaskData build_task(const Corpus& corpus, const std::string& task, const lm::Vocab& vocab, const TaskOptions& options);

enum class Variant { text_only, gesture, gesture_no_fa, gesture_abs_pos, grid_tokens, codebook_indices };
Variant parse_variant(const std::string& s);
std::string to_string(Variant v);
const std::vector<std::string>& variant_names();
bool uses_gestures(Variant v);
TokenSource token_source(Variant v);
alignment::PositionScheme position_scheme(Variant v);

struct VariantResources {
  const lm::MaskedLM* lm = nullptr;                            // pretrained LM
  const alignment::GestureEmbedder* aligned = nullptr;          // gesture
  const alignment::GestureEmbedder* aligned_sequential = nullptr;  // gesture_abs_pos
  const nn::Matrix* codebook = nullptr;                         // gesture_no_fa, codebook_indices
  nn::Index projector_hidden = 0;                               // gesture_no_fa
  int grid_cells = 0;                                           // grid_tokens
};

struct FinetunedModel {
  lm::MaskedLM model;
  std::optional<alignment::GestureEmbedder> gestures;
  infill::FinetuneResult training;
};

// Fine-tunes a copy of the resources for one seed (cfg.seed).
FinetunedModel finetune_variant(Variant variant, const TaskData& task, const VariantResources& resources,
                                const infill::FinetuneConfig& cfg, const alignment::GestureOverride& override = {},
                                const std::function<void(const infill::FinetuneEpoch&)>& on_epoch = {});

// Test-split report labelled with the variant (plus "+mode" when adversarial).
infill::EvalReport evaluate_variant(const lm::MaskedLM& model, const alignment::GestureEmbedder* gestures,
                                    Variant variant, const TaskData& task, std::uint64_t seed,
                                    const alignment::GestureOverride& override = {});

struct RunResult {
  infill::EvalReport report;
  FinetunedModel finetuned;
};

// finetune_variant followed by evaluate_variant; the adversarial override
// applies to training and evaluation alike.
RunResult run_variant(Variant variant, const TaskData& task, const VariantResources& resources,
                      const infill::FinetuneConfig& cfg, const alignment::GestureOverride& override = {},
                      const std::function<void(const infill::FinetuneEpoch&)>& on_epoch = {});

// Fixed-mask validation L_FA for each masking rate, alignment retrained from
// the same initial state each time.
struct MaskingPoint {
  double rate = 0;
  alignment::FaValues val;
};
std::vector<MaskingPoint> masking_sweep(const lm::MaskedLM& lm, const nn::Matrix& codebook,
                                        const std::vector<alignment::PairedExample>& train,
                                        const std::vector<alignment::PairedExample>& val,
                                        const alignment::AlignConfig& base, const std::vector<double>& rates,
                                        double eval_rate);

}  // namespace gesturelm::pipeline
