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

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "gesturelm/error.hpp"
#include "gesturelm/lm/model.hpp"
#include "gesturelm/nn/checkpoint.hpp"
#include "gesturelm/nn/optim.hpp"
#include "support/gradcheck.hpp"

namespace gesturelm::lm {
namespace {

Vocab small_vocab() {
  return build_vocab({"i was tired but i kept going", "we left after the show", "it was for example fine"},
                     {"for example", "if then", "but", "after"});
}

MaskedLM small_model(Index hidden = 8, int layers = 2, std::uint64_t seed = 5) {
  nn::Rng rng(seed);
  return MaskedLM({hidden, layers, 2, 2 * hidden, 16, seed}, small_vocab(), rng);
}

std::vector<Index> iota_positions(Index n) {
  std::vector<Index> p(n);
  for (Index i = 0; i < n; ++i) p[i] = i;
  return p;
}

TEST(Vocab, SpecialsComeFirst) {
  Vocab v;
  EXPECT_EQ(v.size(), 5);
  EXPECT_EQ(v.token(v.bos()), "<s>");
  EXPECT_EQ(v.token(v.eos()), "</s>");
  EXPECT_EQ(v.token(v.mask()), "<mask>");
  EXPECT_EQ(v.token(v.pad()), "<pad>");
  EXPECT_EQ(v.token(v.unk()), "<unk>");
  EXPECT_EQ(v.id("never-seen"), v.unk());
  EXPECT_THROW(v.require("never-seen"), UsageError);
}

TEST(Vocab, SaveLoadRoundTrip) {
  const Vocab v = small_vocab();
  const auto path = std::filesystem::temp_directory_path() / "gesturelm_vocab_test.txt";
  v.save(path);
  const Vocab w = Vocab::load(path);
  EXPECT_EQ(v.tokens(), w.tokens());
  EXPECT_EQ(w.id("for example"), v.id("for example"));
  std::filesystem::remove(path);
  EXPECT_THROW(Vocab::from_tokens({"a", "b"}), DataError);
}

TEST(Vocab, MultiWordMarkersMergeLongestFirst) {
  Vocab v;
  v.add("if");
  v.add("if then");
  v.add("for example");
  const auto merged = merge_phrases(split_words("If then we go for example Now"), v);
  ASSERT_EQ(merged.size(), 5u);
  EXPECT_EQ(merged[0].text, "if then");
  EXPECT_EQ(merged[0].first_word, 0);
  EXPECT_EQ(merged[0].last_word, 1);
  EXPECT_EQ(merged[3].text, "for example");
  EXPECT_EQ(merged[3].first_word, 4);
  EXPECT_EQ(merged[3].last_word, 5);
  EXPECT_EQ(merged[4].text, "now");
}

TEST(Vocab, BuildAndEncode) {
  const Vocab v = small_vocab();
  const auto ids = encode_text("it was for example fine", v);
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(v.token(ids[2]), "for example");
  EXPECT_FALSE(v.contains("for"));
  EXPECT_EQ(encode_text("zebra", v), std::vector<int>{v.unk()});
}

TEST(MaskedLM, EmbeddingIsTokenPlusPosition) {
  const MaskedLM m = small_model();
  const Index id = m.vocab().id("tired");
  const std::vector<Index> ids{id, id}, pos{1, 3};
  const Matrix e = m.embed(ids, pos).value();
  const Matrix& T = m.token_embedding().table().value();
  const Matrix& P = m.position_embedding().table().value();
  for (int r = 0; r < 2; ++r) EXPECT_TRUE(e.row(r) == (T.row(id) + P.row(pos[r])));
  EXPECT_LT(((e.row(0) - e.row(1)) - (P.row(1) - P.row(3))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MaskedLM, SharedPositionsAcceptedAndRangeChecked) {
  const MaskedLM m = small_model();
  const std::vector<Index> ids{0, 6, 7, 1}, pos{0, 1, 1, 2};
  EXPECT_EQ(m.embed(ids, pos).rows(), 4);
  const std::vector<Index> bad_id{m.vocab_size()}, p0{0};
  EXPECT_THROW(m.embed(bad_id, p0), UsageError);
  const std::vector<Index> id0{0}, bad_pos{16};
  EXPECT_THROW(m.embed(id0, bad_pos), UsageError);
}

TEST(MaskedLM, PadRowsNeverAttended) {
  const MaskedLM m = small_model();
  const Vocab& v = m.vocab();
  std::vector<Index> ids{v.bos(), 6, 7, 8, v.eos(), v.pad(), v.pad()};
  const auto pos = iota_positions(7);
  const std::vector<std::uint8_t> valid{1, 1, 1, 1, 1, 0, 0};
  const auto layout = nn::SeqLayout::uniform(1, 7);
  const Matrix a = m.forward(m.embed(ids, pos), layout, valid).value();
  ids[5] = 9;
  ids[6] = 10;
  const Matrix b = m.forward(m.embed(ids, pos), layout, valid).value();
  EXPECT_TRUE(a.topRows(5) == b.topRows(5));
  EXPECT_THROW(m.forward(m.embed(ids, pos), layout, std::vector<std::uint8_t>{1, 1}), UsageError);
}

TEST(MaskedLM, ShapesAndSeededReproducibility) {
  const MaskedLM a = small_model(), b = small_model();
  const std::vector<Index> one{6}, p0{0};
  EXPECT_EQ(a.forward(a.embed(one, p0), nn::SeqLayout::uniform(1, 1)).rows(), 1);
  EXPECT_EQ(a.forward(a.embed(one, p0), nn::SeqLayout::uniform(1, 1)).cols(), 8);
  const std::vector<Index> ids{0, 6, 7, 1};
  const auto pos = iota_positions(4);
  const auto layout = nn::SeqLayout::uniform(1, 4);
  EXPECT_TRUE(a.forward(a.embed(ids, pos), layout).value() == b.forward(b.embed(ids, pos), layout).value());
}

TEST(MaskedLM, LogitProperties) {
  const MaskedLM m = small_model();
  const Matrix zero = m.lm_logits(nn::Tensor(Matrix::Zero(1, 8))).value();
  EXPECT_EQ(zero.maxCoeff(), zero.minCoeff());

  nn::Rng rng(2);
  const nn::Tensor h(nn::normal_matrix(3, 8, 1.0, rng));
  const Matrix logits = m.lm_logits(h).value();
  EXPECT_TRUE(logits.allFinite());
  const Matrix p = nn::softmax_rows(logits);
  for (Index r = 0; r < 3; ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
    Index a, b;
    logits.row(r).maxCoeff(&a);
    (logits.row(r).array() + 17.5).maxCoeff(&b);
    EXPECT_EQ(a, b);
  }
  const std::vector<Index> subset{9, 6, 12};
  const Matrix sub = m.lm_logits(h, subset).value();
  for (std::size_t c = 0; c < subset.size(); ++c) {
    EXPECT_NEAR((sub.col(c) - logits.col(subset[c])).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(MaskedLM, LoraInjectionPreservesOutputsExactly) {
  MaskedLM m = small_model();
  const std::vector<Index> ids{0, 6, 2, 8, 1};
  const auto pos = iota_positions(5);
  const auto layout = nn::SeqLayout::uniform(1, 5);
  const Matrix before = m.lm_logits(m.forward(m.embed(ids, pos), layout)).value();
  nn::Rng rng(9);
  m.inject_lora({4, 8.0}, rng);
  const Matrix after = m.lm_logits(m.forward(m.embed(ids, pos), layout)).value();
  EXPECT_TRUE(before == after);
  // 2 layers x 4 projections x r (in + out)
  EXPECT_EQ(count_parameters(m, true), 2u * 4u * 4u * (8u + 8u));
  EXPECT_EQ(m.adapter_parameters().size(), 2u * 4u * 2u);
  EXPECT_THROW(m.inject_lora({4, 8.0}, rng), std::logic_error);
}

TEST(MaskedLM, FrozenModelHasNoTrainableParameters) {
  MaskedLM m = small_model();
  EXPECT_GT(count_parameters(m, true), 0u);
  m.set_trainable(false);
  EXPECT_EQ(count_parameters(m, true), 0u);
  EXPECT_EQ(count_parameters(m, false), m.parameter_count());
}

TEST(MaskedLM, LoraStepChangesOnlyAdapters) {
  MaskedLM m = small_model();
  nn::Rng rng(3);
  m.inject_lora({2, 4.0}, rng);
  const auto snapshot = nn::ParameterSnapshot::take(m);
  nn::AdamW opt(m.parameters(true), {});
  const std::vector<Index> ids{0, 6, 2, 8, 1}, rows{2}, labels{6, 7, 9}, gold{1};
  const auto pos = iota_positions(5);
  for (int s = 0; s < 2; ++s) {
    auto hidden = m.forward(m.embed(ids, pos), nn::SeqLayout::uniform(1, 5));
    nn::cross_entropy(m.lm_logits(nn::gather_rows(hidden, rows), labels), gold).backward();
    opt.step();
  }
  const auto changed = snapshot.changed(m);
  EXPECT_FALSE(changed.empty());
  for (const auto& name : changed) EXPECT_NE(name.find(".lora_"), std::string::npos) << name;
}

TEST(MaskedLM, CrossEntropyGradientMatchesFiniteDifferences) {
  MaskedLM m = small_model(4, 2, 11);
  // Perturb the zero-initialised head bias so every path is exercised.
  nn::Rng rng(4);
  for (auto& [name, t] : m.named_parameters()) {
    if (name.find("bias") != std::string::npos || name.find("beta") != std::string::npos) {
      t.mutable_value() += nn::normal_matrix(t.rows(), t.cols(), 0.1, rng);
    }
  }
  const std::vector<Index> ids{0, 6, 2, 8, 1, 0, 9, 2, 1}, pos{0, 1, 2, 3, 4, 0, 1, 2, 3};
  const std::vector<Index> len{5, 4}, rows{2, 7}, gold{8, 9};
  const auto layout = nn::SeqLayout::from_lengths(len);
  auto r = testing::check_gradients(m.parameters(true), [&] {
    auto hidden = m.forward(m.embed(ids, pos), layout);
    return nn::cross_entropy(m.lm_logits(nn::gather_rows(hidden, rows)), gold);
  });
  EXPECT_LT(r.max_rel, 1e-3);
}

TEST(MaskedLM, CheckpointRoundTripWithAdapters) {
  MaskedLM m = small_model();
  nn::Rng rng(6);
  m.inject_lora({2, 4.0}, rng);
  for (auto& [name, t] : m.adapter_parameters()) t.mutable_value().setConstant(0.05);
  const auto path = std::filesystem::temp_directory_path() / "gesturelm_lm_test.ckpt";
  m.save(path, {{"note", "x"}});
  const MaskedLM back = MaskedLM::load(path);
  EXPECT_TRUE(back.has_lora());
  EXPECT_EQ(back.vocab().tokens(), m.vocab().tokens());
  const std::vector<Index> ids{0, 6, 2, 8, 1};
  const auto pos = iota_positions(5);
  const auto layout = nn::SeqLayout::uniform(1, 5);
  EXPECT_TRUE(m.lm_logits(m.forward(m.embed(ids, pos), layout)).value() ==
              back.lm_logits(back.forward(back.embed(ids, pos), layout)).value());
  std::filesystem::remove(path);
  std::filesystem::remove(nn::sidecar_path(path));
}

TEST(MaskedLM, ConfigRejectsUnknownKeys) {
  LmConfig c;
  read_config({{"hidden", 32}, {"heads", 2}}, c);
  EXPECT_EQ(c.hidden, 32);
  EXPECT_THROW(read_config({{"hiden", 32}}, c), UsageError);
  LoraConfig l;
  EXPECT_THROW(read_config({{"rank", 8}, {"dropout", 0.1}}, l), UsageError);
  EXPECT_EQ(LoraConfig::large().rank, 128);
  EXPECT_EQ(LoraConfig::large().alpha, 256.0);
}

TEST(Mlm, PretrainingLowersLossDeterministically) {
  const Vocab v = small_vocab();
  std::vector<std::vector<int>> sentences;
  for (int i = 0; i < 16; ++i) {
    sentences.push_back(encode_text(i % 2 ? "i was tired but i kept going" : "we left after the show", v));
  }
  MlmConfig cfg;
  cfg.epochs = 80;
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  auto run = [&] {
    nn::Rng rng(1);
    MaskedLM m({16, 1, 2, 32, 16, 1}, v, rng);
    return pretrain_mlm(m, sentences, cfg);
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), 80u);
  EXPECT_LT(a.back().train_loss, 0.5 * a.front().train_loss);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].train_loss, b[i].train_loss);
  EXPECT_THROW(pretrain_mlm(*std::make_unique<MaskedLM>(small_model()), {}, cfg), DataError);
}

}  // namespace
}  // namespace gesturelm::lm
