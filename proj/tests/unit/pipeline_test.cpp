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

#include <gtest/gtest.h>

#include <filesystem>

#include "gesturelm/error.hpp"
#include "gesturelm/nn/module.hpp"
#include "gesturelm/pipeline/experiment.hpp"

namespace gesturelm::pipeline {
namespace {

namespace fs = std::filesystem;

data::SynthConfig tiny_synth() {
  data::SynthConfig c;
  c.tasks = {"stance"};
  c.train = 40;
  c.val = 8;
  c.test = 8;
  return c;
}

tokenizer::VqVae tiny_tokenizer(const Corpus& corpus) {
  tokenizer::TokenizerConfig tc;
  tc.codebook_size = 16;
  tc.latent_dim = 16;
  tc.ffn_width = 32;
  tc.epochs = 1;
  tc.lr = 1e-4;
  return tokenizer::train_tokenizer(tokenizer_windows(corpus, data::Split::train, 32, 24, 0), tc,
                                    motion::Skeleton::upper_body())
      .model;
}

lm::MaskedLM tiny_lm(const lm::Vocab& vocab) {
  lm::LmConfig c;
  c.hidden = 16;
  c.layers = 1;
  c.heads = 2;
  c.ffn_width = 32;
  c.max_positions = 32;
  nn::Rng rng(3);
  return lm::MaskedLM(c, vocab, rng);
}

struct PipelineFixture : ::testing::Test {
  static void SetUpTestSuite() {
    corpus_ = new Corpus(synthetic_corpus(tiny_synth()));
    vq_ = new tokenizer::VqVae(tiny_tokenizer(*corpus_));
    tokenize_corpus(*corpus_, *vq_);
    grid_tokenize_corpus(*corpus_, motion::Skeleton::upper_body(), {}, 4, 32);
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete vq_;
  }
  static Corpus* corpus_;
  static tokenizer::VqVae* vq_;
};
Corpus* PipelineFixture::corpus_ = nullptr;
tokenizer::VqVae* PipelineFixture::vq_ = nullptr;

TEST(Clone, DeepCopiesParametersAndFlags) {
  const auto vocab = lm::build_vocab({"a b c"}, {});
  auto lm = tiny_lm(vocab);
  nn::Rng rng(1);
  lm.inject_lora({2, 4}, rng);
  auto copy = lm.clone();
  const auto a = lm.named_parameters(), b = copy.named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_TRUE(a[i].second.value() == b[i].second.value());
    EXPECT_EQ(a[i].second.requires_grad(), b[i].second.requires_grad());
    EXPECT_FALSE(a[i].second.same_node(b[i].second));
  }
  auto first = b[0].second;
  first.mutable_value()(0, 0) += 1;
  EXPECT_NE(a[0].second.value()(0, 0), b[0].second.value()(0, 0));

  nn::Matrix cb = nn::normal_matrix(6, 4, 1.0, rng);
  auto g = alignment::GestureEmbedder::from_codebook(cb, 8, 16, rng);
  auto gc = g.clone();
  const std::vector<int> ids = {0, 5, 6, 7, 8};
  EXPECT_TRUE(g.content(ids).value() == gc.content(ids).value());
  EXPECT_EQ(gc.trainable().size(), g.trainable().size());
}

TEST_F(PipelineFixture, TokensAndVocabulary) {
  for (const auto& u : corpus_->utterances) {
    EXPECT_EQ(u.vq.ids.front(), tokenizer::bog_id(16));
    EXPECT_EQ(u.vq.ids.size(), 10u);  // one window
    EXPECT_EQ(u.grid.ids.size(), 10u);
  }
  const auto vocab = corpus_vocab(*corpus_, {"stance"});
  for (const auto& m : infill::LabelSet::defaults("stance").markers) EXPECT_TRUE(vocab.contains(m)) << m;
  EXPECT_EQ(mlm_sentences(*corpus_, data::Split::train, vocab).size(), 40u);
  const auto pairs = paired_examples(*corpus_, data::Split::val, vocab, TokenSource::vq, 16);
  ASSERT_EQ(pairs.size(), 8u);
  EXPECT_TRUE(pairs[0].has_gestures());
}

TEST_F(PipelineFixture, TaskConstructionAndFrequencyFilter) {
  const auto vocab = corpus_vocab(*corpus_, {"stance"});
  TaskOptions opt;
  opt.gesture_vocab = 16;
  opt.threshold = 2;
  const auto t = build_task(*corpus_, "stance", vocab, opt);
  long total = 0, kept = 0;
  for (std::size_t i = 0; i < t.train_counts.size(); ++i) {
    const std::string marker = infill::LabelSet::defaults("stance").markers[i];
    EXPECT_EQ(t.labels.index_of(marker) >= 0, t.train_counts[i] > 2) << marker;
    total += t.train_counts[i];
    if (t.train_counts[i] > 2) kept += t.train_counts[i];
  }
  EXPECT_EQ(total, 40);
  EXPECT_EQ(static_cast<long>(t.train.size()), kept);
  EXPECT_LT(t.train.size(), 40u);
  opt.threshold = 0;
  EXPECT_EQ(build_task(*corpus_, "stance", vocab, opt).test.size(), 8u);
  for (const auto& ex : t.test) {
    EXPECT_EQ(ex.input.text_ids[ex.mask_slot], 2);
    EXPECT_TRUE(ex.input.has_gestures());
  }
  opt.threshold = 1000;
  EXPECT_THROW(build_task(*corpus_, "stance", vocab, opt), DataError);
}

TEST(TextOnly, NeverReadsMotionFiles) {
  const auto dir = fs::temp_directory_path() / "gesturelm_pipeline_textonly";
  fs::remove_all(dir);
  auto cfg = tiny_synth();
  const auto manifest = data::generate_synthetic(cfg, dir);
  fs::remove_all(dir / "motion");
  data::LoadOptions lo;
  lo.read_motion = false;
  const auto corpus = load_corpus(manifest, lo);
  EXPECT_EQ(corpus.report.skipped, 0);
  const auto vocab = corpus_vocab(corpus, {"stance"});
  TaskOptions opt;
  opt.gestures = false;
  opt.threshold = 0;
  const auto task = build_task(corpus, "stance", vocab, opt);
  const auto lm = tiny_lm(vocab);
  VariantResources res;
  res.lm = &lm;
  infill::FinetuneConfig fc;
  fc.epochs = 1;
  fc.lora = {2, 4};
  const auto r = run_variant(Variant::text_only, task, res, fc);
  EXPECT_EQ(r.report.total, 8);
  EXPECT_EQ(r.report.variant, "text_only");
  // The shared LM is untouched.
  EXPECT_FALSE(lm.has_lora());
}

TEST_F(PipelineFixture, EveryVariantRuns) {
  const auto vocab = corpus_vocab(*corpus_, {"stance"});
  const auto lm = tiny_lm(vocab);
  nn::Rng rng(4);
  const auto& cb = vq_->codebook().value();
  const auto aligned = alignment::GestureEmbedder::from_codebook(cb, 0, 16, rng);
  const auto aligned_seq = alignment::GestureEmbedder::from_codebook(cb, 0, 16, rng);
  VariantResources res{&lm, &aligned, &aligned_seq, &cb, 0, tokenizer::GridSpec().cells()};
  infill::FinetuneConfig fc;
  fc.epochs = 1;
  fc.lora = {2, 4};
  for (const auto& name : variant_names()) {
    const Variant v = parse_variant(name);
    TaskOptions opt;
    opt.threshold = 0;
    opt.gestures = uses_gestures(v);
    opt.source = token_source(v);
    opt.gesture_vocab = v == Variant::grid_tokens ? res.grid_cells : 16;
    opt.pair.positions = position_scheme(v);
    const auto task = build_task(*corpus_, "stance", vocab, opt);
    const auto r = run_variant(v, task, res, fc);
    EXPECT_EQ(r.report.variant, name);
    EXPECT_EQ(r.report.total, 8);
    EXPECT_EQ(r.finetuned.gestures.has_value(), uses_gestures(v));
    if (v == Variant::gesture) {
      // Fine-tuning leaves the aligned embedder (projector) unchanged.
      EXPECT_TRUE(r.finetuned.gestures->content(std::vector<int>{0, 3}).value() ==
                  aligned.content(std::vector<int>{0, 3}).value());
    }
  }
  EXPECT_THROW(parse_variant("gesture_v2"), UsageError);
}

TEST_F(PipelineFixture, AdversarialRunsAndMismatches) {
  const auto vocab = corpus_vocab(*corpus_, {"stance"});
  const auto lm = tiny_lm(vocab);
  nn::Rng rng(4);
  const auto& cb = vq_->codebook().value();
  const auto aligned = alignment::GestureEmbedder::from_codebook(cb, 0, 16, rng);
  VariantResources res;
  res.lm = &lm;
  res.aligned = &aligned;
  infill::FinetuneConfig fc;
  fc.epochs = 1;
  fc.lora = {2, 4};
  TaskOptions opt;
  opt.threshold = 0;
  opt.gesture_vocab = 16;
  const auto task = build_task(*corpus_, "stance", vocab, opt);
  const alignment::GestureOverride random{alignment::AdversarialMode::random_normal, 9};
  const auto a = run_variant(Variant::gesture, task, res, fc, random);
  const auto b = run_variant(Variant::gesture, task, res, fc, random);
  EXPECT_EQ(a.report.variant, "gesture+random_normal");
  EXPECT_EQ(a.report.confusion, b.report.confusion);

  EXPECT_THROW(run_variant(Variant::text_only, task, res, fc), UsageError);
  opt.gestures = false;
  const auto text = build_task(*corpus_, "stance", vocab, opt);
  EXPECT_THROW(run_variant(Variant::text_only, text, res, fc, random), UsageError);
  EXPECT_THROW(run_variant(Variant::gesture, text, res, fc), UsageError);
  res.aligned = nullptr;
  EXPECT_THROW(run_variant(Variant::gesture, task, res, fc), UsageError);
}

TEST_F(PipelineFixture, MaskingSweepReportsEachRate) {
  const auto vocab = corpus_vocab(*corpus_, {"stance"});
  const auto lm = tiny_lm(vocab);
  const auto train = paired_examples(*corpus_, data::Split::train, vocab, TokenSource::vq, 16);
  const auto val = paired_examples(*corpus_, data::Split::val, vocab, TokenSource::vq, 16);
  alignment::AlignConfig ac;
  ac.epochs = 1;
  const auto points = masking_sweep(lm, vq_->codebook().value(), train, val, ac, {0.3, 0.8}, 0);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[1].rate, 0.8);
  EXPECT_GT(points[0].val.fa, 0);
}

}  // namespace
}  // namespace gesturelm::pipeline
