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
#include <random>

#include "gesturelm/alignment/model.hpp"
#include "gesturelm/alignment/pairing.hpp"
#include "gesturelm/error.hpp"
#include "gesturelm/nn/checkpoint.hpp"
#include "support/gradcheck.hpp"
#include "support/positions_oracle.hpp"

namespace gesturelm::alignment {
namespace {

constexpr double kFps = 15.0;

TimedTranscript make_transcript(const std::vector<std::string>& words, const std::vector<double>& bounds) {
  TimedTranscript t;
  t.id = "utt";
  for (std::size_t i = 0; i < words.size(); ++i) t.words.push_back({words[i], bounds[2 * i], bounds[2 * i + 1]});
  return t;
}

std::vector<FrameSpan> uniform_spans(int count, int frames_per_token) {
  std::vector<FrameSpan> s;
  for (int i = 0; i < count; ++i) s.push_back({i * frames_per_token, (i + 1) * frames_per_token});
  return s;
}

tokenizer::GestureTokenSeq wrap(const std::vector<int>& interior, const std::vector<FrameSpan>& spans, int K) {
  tokenizer::GestureTokenSeq g;
  g.ids.push_back(tokenizer::bog_id(K));
  g.ids.insert(g.ids.end(), interior.begin(), interior.end());
  g.ids.push_back(tokenizer::eog_id(K));
  g.spans = spans;
  return g;
}

TEST(Transcript, ValidationAndJsonLines) {
  auto t = make_transcript({"a", "b"}, {0.0, 0.5, 0.5, 1.0});
  EXPECT_NO_THROW(t.validate());
  auto bad = make_transcript({"a", "b"}, {0.0, 0.6, 0.5, 1.0});
  EXPECT_THROW(bad.validate(), DataError);
  auto inverted = make_transcript({"a"}, {0.4, 0.4});
  EXPECT_THROW(inverted.validate(), DataError);
  const auto path = std::filesystem::temp_directory_path() / "gesturelm_transcripts.jsonl";
  write_transcripts(path, {t, t});
  const auto back = read_transcripts(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].words[1].text, "b");
  EXPECT_EQ(back[1].words[1].end, 1.0);
  std::filesystem::remove(path);
}

TEST(Positions, ProportionalSubTokenSplit) {
  lm::Vocab v;
  const auto t = make_transcript({"amazing"}, {1.0, 1.7});
  auto split = [](const std::string& w) {
    return w == "amazing" ? std::vector<std::string>{"ama", "zing"} : std::vector<std::string>{w};
  };
  const auto toks = timed_tokens(t, v, split);
  ASSERT_EQ(toks.size(), 2u);
  EXPECT_NEAR(toks[0].end - toks[0].start, 0.3, 1e-12);
  EXPECT_NEAR(toks[1].end - toks[1].start, 0.4, 1e-12);
  EXPECT_EQ(toks[1].end, 1.7);
}

TEST(Positions, HalfSecondWordGetsTwoTokens) {
  lm::Vocab v;
  const auto t = make_transcript({"so", "then", "we"}, {0.0, 0.5, 0.5, 1.0, 1.0, 1.6});
  const auto spans = uniform_spans(6, 4);
  const auto pos = assign_positions(t, spans, kFps, v);
  EXPECT_EQ(std::count(pos.begin(), pos.end(), 0), 2);
  EXPECT_EQ(std::lround(0.5 / (4 / kFps)), 2);  // 1.875 tokens per word
}

TEST(Positions, OneSpanWordGetsOneToken) {
  lm::Vocab v;
  const double span = 4 / kFps;
  const auto t = make_transcript({"a", "b", "c"}, {0.0, span, span, 2 * span, 2 * span, 3 * span});
  const auto pos = assign_positions(t, uniform_spans(3, 4), kFps, v);
  EXPECT_EQ(pos, (std::vector<int>{0, 1, 2}));
}

TEST(Positions, GapsAndClamping) {
  lm::Vocab v;
  // words at [0.2, 0.4) and [1.0, 1.2); gap midpoint 0.7
  const auto t = make_transcript({"a", "b"}, {0.2, 0.4, 1.0, 1.2});
  const std::vector<FrameSpan> spans{{0, 2}, {9, 11}, {10, 11}, {40, 44}};
  // midpoints 0.0667 (clamped to a), 0.667 (nearer a), 0.7 (tie -> a), 2.8 (clamped to b)
  EXPECT_EQ(assign_positions(t, spans, kFps, v), (std::vector<int>{0, 0, 0, 1}));
  TimedTranscript empty;
  EXPECT_THROW(assign_positions(empty, spans, kFps, v), DataError);
}

TEST(Positions, MatchBruteForceOracleOnRandomTranscripts) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> nwords(1, 12), wlen(1, 9), nparts(1, 3), gap_frames(0, 3);
  std::uniform_real_distribution<double> dur(0.08, 0.7), gap(0.0, 0.3), coin(0, 1);
  lm::Vocab v;
  auto split = [](const std::string& w) {
    // deterministic split into up to three pieces by length
    std::vector<std::string> parts;
    const std::size_t n = w.size() % 3 + 1;
    const std::size_t step = std::max<std::size_t>(1, w.size() / n);
    for (std::size_t i = 0; i < w.size(); i += step) parts.push_back(w.substr(i, std::min(step, w.size() - i)));
    return parts;
  };
  for (int trial = 0; trial < 500; ++trial) {
    TimedTranscript t;
    t.id = "u" + std::to_string(trial);
    double clock = gap(rng);
    const int n = nwords(rng);
    for (int i = 0; i < n; ++i) {
      std::string w(wlen(rng), 'a' + (i % 26));
      const double d = dur(rng);
      t.words.push_back({w, clock, clock + d});
      clock += d + (coin(rng) < 0.3 ? gap(rng) : 0.0);
    }
    std::vector<FrameSpan> spans;
    int f = 0;
    const int total = static_cast<int>(std::ceil((clock + 0.5) * kFps));
    while (f < total) {
      spans.push_back({f, f + 4});
      f += 4 + gap_frames(rng) * (coin(rng) < 0.2);
    }
    ASSERT_EQ(assign_positions(t, spans, kFps, v, split), testing::oracle_positions(t, spans, kFps, split)) << trial;
  }
}

TEST(Pairing, LayoutAndSharedPositions) {
  const lm::Vocab v = lm::build_vocab({"we go home"}, {});
  const auto t = make_transcript({"we", "go", "home"}, {0.0, 0.4, 0.4, 1.0, 1.0, 1.4});
  const int K = 16;
  const std::vector<FrameSpan> spans{{7, 9}, {9, 11}};  // midpoints 0.533, 0.667 -> "go"
  EXPECT_EQ(assign_positions(t, spans, kFps, v), (std::vector<int>{1, 1}));
  const auto p = build_pair(t, wrap({3, 7}, spans, K), kFps, v, K);
  EXPECT_EQ(p.text_ids.front(), v.bos());
  EXPECT_EQ(p.text_ids.back(), v.eos());
  EXPECT_EQ(p.text_positions, (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(p.gesture_ids, (std::vector<int>{K, 3, 7, K + 1}));
  EXPECT_EQ(p.gesture_positions, (std::vector<int>{0, 2, 2, 4}));
  EXPECT_EQ(p.modalities().size(), 9u);
  EXPECT_EQ(p.modalities()[5], Modality::gesture);
  for (std::size_t i = 1; i + 1 < p.gesture_positions.size(); ++i) {
    const int word = p.text_words[p.gesture_positions[i]].first;
    const double mid = (spans[i - 1].begin + spans[i - 1].end) / (2 * kFps);
    EXPECT_LE(t.words[word].start, mid);
    EXPECT_LT(mid, t.words[word].end);
  }
}

TEST(Pairing, EmptyGesturesAndSequentialScheme) {
  const lm::Vocab v = lm::build_vocab({"we go home"}, {});
  const auto t = make_transcript({"we", "go", "home"}, {0.0, 0.4, 0.4, 1.0, 1.0, 1.4});
  const auto text = text_example(t, v);
  const auto empty = build_pair(t, {}, kFps, v, 8);
  EXPECT_EQ(empty.text_ids, text.text_ids);
  EXPECT_EQ(empty.gesture_ids, (std::vector<int>{8, 9}));
  EXPECT_EQ(empty.gesture_positions, (std::vector<int>{0, 4}));
  EXPECT_FALSE(text.has_gestures());

  PairOptions seq;
  seq.positions = PositionScheme::sequential;
  const auto p = build_pair(t, wrap({1, 2}, {{0, 4}, {4, 8}}, 8), kFps, v, 8, seq);
  EXPECT_EQ(p.gesture_positions, (std::vector<int>{5, 6, 7, 8}));
  EXPECT_THROW(build_pair(t, wrap({9}, {{0, 4}}, 8), kFps, v, 8), DataError);
}

PairedExample synthetic_pair(std::mt19937_64& rng, int words, int gestures, int K) {
  PairedExample p;
  p.id = "p";
  p.gesture_vocab = K;
  std::uniform_int_distribution<int> word(5, 40), code(0, K - 1);
  p.text_ids.push_back(0);
  for (int i = 0; i < words; ++i) p.text_ids.push_back(word(rng));
  p.text_ids.push_back(1);
  p.gesture_ids.push_back(K);
  for (int i = 0; i < gestures; ++i) p.gesture_ids.push_back(code(rng));
  p.gesture_ids.push_back(K + 1);
  for (std::size_t i = 0; i < p.text_ids.size(); ++i) p.text_positions.push_back(static_cast<int>(i));
  for (std::size_t i = 0; i < p.gesture_ids.size(); ++i) {
    p.gesture_positions.push_back(std::min<int>(static_cast<int>(i), words + 1));
  }
  p.text_gold.assign(p.text_ids.size(), -1);
  p.gesture_gold.assign(p.gesture_ids.size(), -1);
  return p;
}

TEST(Masking, ZeroProbabilityMasksNothing) {
  std::mt19937_64 rng(1);
  const auto p = synthetic_pair(rng, 10, 10, 32);
  const auto m = mask_tokens(p, 0.0, 0.0, rng);
  EXPECT_EQ(m.text_ids, p.text_ids);
  EXPECT_EQ(m.gesture_ids, p.gesture_ids);
  EXPECT_TRUE(std::all_of(m.text_gold.begin(), m.text_gold.end(), [](int g) { return g < 0; }));
  EXPECT_THROW(mask_tokens(p, 1.0, 0.0, rng), UsageError);
}

TEST(Masking, RateWithinTolerance) {
  std::mt19937_64 rng(2);
  const int K = 64;
  long text_total = 0, text_masked = 0, g_total = 0, g_masked = 0;
  while (text_total < 12000 || g_total < 12000) {
    const auto m = mask_tokens(synthetic_pair(rng, 20, 20, K), 0.3, 0.3, rng);
    for (std::size_t i = 1; i + 1 < m.text_ids.size(); ++i) {
      ++text_total;
      text_masked += m.text_gold[i] >= 0;
      if (m.text_gold[i] >= 0) EXPECT_EQ(m.text_ids[i], 2);
    }
    for (std::size_t i = 1; i + 1 < m.gesture_ids.size(); ++i) {
      ++g_total;
      g_masked += m.gesture_gold[i] >= 0;
      if (m.gesture_gold[i] >= 0) EXPECT_EQ(m.gesture_ids[i], tokenizer::gmask_id(K));
    }
  }
  const double rt = static_cast<double>(text_masked) / text_total, rg = static_cast<double>(g_masked) / g_total;
  EXPECT_GE(rt, 0.28);
  EXPECT_LE(rt, 0.32);
  EXPECT_GE(rg, 0.28);
  EXPECT_LE(rg, 0.32);
}

TEST(Masking, SpecialsNeverMaskedAndSeedDeterministic) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = mask_tokens(synthetic_pair(rng, 6, 6, 16), 0.99, 0.99, rng);
    EXPECT_EQ(m.text_ids.front(), 0);
    EXPECT_EQ(m.text_ids.back(), 1);
    EXPECT_EQ(m.gesture_ids.front(), 16);
    EXPECT_EQ(m.gesture_ids.back(), 17);
  }
  std::mt19937_64 g(4);
  const auto p = synthetic_pair(g, 12, 12, 16);
  std::mt19937_64 a(77), b(77);
  const auto ma = mask_tokens(p, 0.3, 0.3, a), mb = mask_tokens(p, 0.3, 0.3, b);
  EXPECT_EQ(ma.text_gold, mb.text_gold);
  EXPECT_EQ(ma.gesture_gold, mb.gesture_gold);
}

TEST(Projector, ZeroWeightsLocalityAndGradients) {
  nn::Rng rng(5);
  Projector proj(2, 3, 2, rng);
  nn::Rng xr(6);
  const Tensor x(nn::normal_matrix(4, 2, 1.0, xr));
  const Matrix y = proj.forward(x).value();
  // permutation equivariance and locality
  Matrix perm = x.value();
  perm.row(0).swap(perm.row(3));
  const Matrix yp = proj.forward(Tensor(perm)).value();
  EXPECT_TRUE(yp.row(0) == y.row(3));
  EXPECT_TRUE(yp.row(3) == y.row(0));
  EXPECT_TRUE(yp.row(1) == y.row(1));
  Matrix changed = x.value();
  changed.row(2) *= 3.0;
  const Matrix yc = proj.forward(Tensor(changed)).value();
  EXPECT_TRUE(yc.row(0) == y.row(0) && yc.row(1) == y.row(1) && yc.row(3) == y.row(3));

  auto r = testing::check_gradients(proj.parameters(true), [&] { return nn::sum(nn::mul(proj.forward(x), proj.forward(x))); });
  EXPECT_LT(r.max_rel, 1e-4);

  for (auto& t : proj.parameters()) t.mutable_value().setZero();
  EXPECT_EQ(proj.forward(x).value().cwiseAbs().maxCoeff(), 0.0);
}

TEST(FaLoss, EmptySetsAndUniformLogits) {
  const std::vector<Index> none;
  const auto empty = fa_loss(Tensor(), none, Tensor(), none);
  EXPECT_EQ(empty.fa.item(), 0.0);
  const std::vector<Index> one{17};
  const auto uniform = fa_loss(Tensor(), none, Tensor(Matrix::Zero(1, 512)), one);
  EXPECT_NEAR(uniform.mgp.item(), std::log(512.0), 1e-6);
  EXPECT_NEAR(uniform.mgp.item(), 6.2383, 1e-4);
  EXPECT_EQ(uniform.fa.item(), uniform.mgp.item());
}

TEST(FaLoss, MatchesPerSlotOracle) {
  nn::Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix lt = nn::normal_matrix(5, 30, 2.0, rng), lg = nn::normal_matrix(3, 12, 2.0, rng);
    std::uniform_int_distribution<Index> tv(0, 29), gv(0, 11);
    std::vector<Index> gt, gg;
    for (int i = 0; i < 5; ++i) gt.push_back(tv(rng));
    for (int i = 0; i < 3; ++i) gg.push_back(gv(rng));
    auto ce = [](const Matrix& l, const std::vector<Index>& g) {
      double s = 0;
      for (Index r = 0; r < l.rows(); ++r) {
        double z = 0;
        for (Index c = 0; c < l.cols(); ++c) z += std::exp(l(r, c));
        s += -std::log(std::exp(l(r, g[r])) / z);
      }
      return s / l.rows();
    };
    const auto loss = fa_loss(Tensor(lt), gt, Tensor(lg), gg);
    EXPECT_NEAR(loss.mlm.item(), ce(lt, gt), 1e-6);
    EXPECT_NEAR(loss.mgp.item(), ce(lg, gg), 1e-6);
    EXPECT_EQ(loss.fa.item(), loss.mgp.item() + loss.mlm.item());
  }
  Matrix bad = Matrix::Zero(1, 4);
  bad(0, 1) = std::nan("");
  const std::vector<Index> g{0};
  try {
    fa_loss(Tensor(bad), g, Tensor(), {});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("L_MLM"), std::string::npos);
  }
}

struct Fixture {
  lm::MaskedLM lm;
  GestureEmbedder gestures;
  GestureHead head;
  std::vector<PairedExample> pairs;
  static constexpr int K = 8;

  explicit Fixture(std::uint64_t seed = 1) {
    const std::vector<std::string> texts{
        "red fox runs far past town",     "blue owl sleeps now in trees",  "green frog jumps high over ponds",
        "old cat eats fish every noon",   "tall man reads books at night", "small dog barks loud at cars",
        "white bird sings well each dawn", "dark cloud brings rain to hills"};
    const lm::Vocab v = lm::build_vocab(texts, {});
    nn::Rng rng(seed);
    lm = lm::MaskedLM({32, 2, 2, 64, 32, seed}, v, rng);
    std::vector<std::vector<int>> sentences;
    for (const auto& t : texts) sentences.push_back(lm::encode_text(t, v));
    lm::MlmConfig mcfg;
    mcfg.epochs = 300;
    mcfg.batch_size = 8;
    mcfg.lr = 1e-2;
    mcfg.mask_prob = 0.3;
    lm::pretrain_mlm(lm, sentences, mcfg);
    gestures = GestureEmbedder::from_codebook(nn::normal_matrix(K, 6, 1.0, rng), 0, 32, rng);
    head = GestureHead(32, K, rng);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      TimedTranscript t;
      t.id = "utt" + std::to_string(i);
      const auto words = lm::split_words(texts[i]);
      for (std::size_t w = 0; w < words.size(); ++w) t.words.push_back({words[w], 0.4 * w, 0.4 * (w + 1)});
      std::vector<int> ids;
      std::vector<FrameSpan> spans;
      // one 6-frame (0.4 s) token per word; each utterance repeats its own code
      for (int g = 0; g < 6; ++g) {
        ids.push_back(static_cast<int>(i % K));
        spans.push_back({g * 6, g * 6 + 6});
      }
      pairs.push_back(build_pair(t, wrap(ids, spans, K), kFps, v, K));
    }
  }
};

TEST(EncodeBatch, TextOnlyAndAdversarialModes) {
  Fixture f;
  nn::NoGradGuard guard;
  const PairedExample text = [&] {
    PairedExample p = f.pairs[0];
    p.gesture_ids.clear();
    p.gesture_positions.clear();
    p.gesture_gold.clear();
    return p;
  }();
  const PairedExample* tb[] = {&text};
  std::vector<Index> ids(text.text_ids.begin(), text.text_ids.end()), pos(text.text_positions.begin(), text.text_positions.end());
  EXPECT_TRUE(encode_batch(f.lm, nullptr, tb).hidden.value() ==
              f.lm.forward(f.lm.embed(ids, pos), nn::SeqLayout::uniform(1, static_cast<Index>(ids.size()))).value());
  EXPECT_THROW(encode_batch(f.lm, nullptr, tb, {AdversarialMode::random_normal, 1}), UsageError);

  const PairedExample* b0[] = {&f.pairs[0]};
  const Matrix plain = encode_batch(f.lm, &f.gestures, b0).hidden.value();
  EXPECT_TRUE(encode_batch(f.lm, &f.gestures, b0, {AdversarialMode::none, 9}).hidden.value() == plain);

  // different gesture content, same timing
  PairedExample other = f.pairs[0];
  for (std::size_t i = 1; i + 1 < other.gesture_ids.size(); ++i) other.gesture_ids[i] = (other.gesture_ids[i] + 3) % Fixture::K;
  const PairedExample* b1[] = {&other};
  const GestureOverride pos_only{AdversarialMode::positional_only, 0};
  EXPECT_FALSE(encode_batch(f.lm, &f.gestures, b1).hidden.value() == plain);
  EXPECT_TRUE(encode_batch(f.lm, &f.gestures, b1, pos_only).hidden.value() ==
              encode_batch(f.lm, &f.gestures, b0, pos_only).hidden.value());

  const GestureOverride rn{AdversarialMode::random_normal, 42};
  const Matrix r1 = encode_batch(f.lm, &f.gestures, b0, rn).hidden.value();
  EXPECT_TRUE(encode_batch(f.lm, &f.gestures, b0, rn).hidden.value() == r1);
  EXPECT_FALSE(encode_batch(f.lm, &f.gestures, b0, {AdversarialMode::random_normal, 43}).hidden.value() == r1);
  EXPECT_TRUE(encode_batch(f.lm, &f.gestures, b1, rn).hidden.value() == r1);
}

TEST(Alignment, FreezingContractAndOverfit) {
  Fixture f;
  const auto lm_before = nn::ParameterSnapshot::take(f.lm);
  const Matrix codebook = f.gestures.table().value();
  AlignConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  cfg.warmup_ratio = 0.0;
  cfg.patience = 300;
  cfg.weight_decay = 0.0;
  const auto result = train_alignment(f.lm, f.gestures, f.head, f.pairs, {}, cfg);
  EXPECT_TRUE(lm_before.changed(f.lm).empty());
  EXPECT_TRUE(f.gestures.table().value() == codebook);
  EXPECT_EQ(f.lm.parameter_count(true), 0u);
  EXPECT_LE(result.log.size(), 300u);

  // fixed masks over many draws of the training pairs
  std::mt19937_64 rng(99);
  std::vector<PairedExample> masked;
  for (int rep = 0; rep < 20; ++rep) {
    for (const auto& p : f.pairs) masked.push_back(mask_tokens(p, 0.3, 0.3, rng));
  }
  const FaValues v = evaluate_fa(f.lm, f.gestures, f.head, masked);
  EXPECT_LT(v.fa, 0.1) << "mlm " << v.mlm << " mgp " << v.mgp;
  EXPECT_THROW(train_alignment(f.lm, f.gestures, f.head, {}, {}, cfg), DataError);
}

TEST(Alignment, TrainableSetIsProjectorHeadAndSpecials) {
  Fixture f;
  const auto g_before = nn::ParameterSnapshot::take(f.gestures);
  const auto h_before = nn::ParameterSnapshot::take(f.head);
  AlignConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  train_alignment(f.lm, f.gestures, f.head, f.pairs, f.pairs, cfg);
  auto changed = g_before.changed(f.gestures);
  std::sort(changed.begin(), changed.end());
  EXPECT_EQ(changed, (std::vector<std::string>{"projector.fc1.bias", "projector.fc1.weight", "projector.fc2.bias",
                                                "projector.fc2.weight", "specials"}));
  EXPECT_EQ(h_before.changed(f.head).size(), 2u);
}

TEST(Alignment, CheckpointRoundTrip) {
  Fixture f;
  const auto path = std::filesystem::temp_directory_path() / "gesturelm_alignment_test.ckpt";
  save_alignment(path, f.gestures, f.head, {{"positions", "shared"}});
  const auto back = load_alignment(path);
  const std::vector<int> ids{8, 1, 2, 10, 9};
  EXPECT_TRUE(back.gestures.content(ids).value() == f.gestures.content(ids).value());
  EXPECT_EQ(back.meta.at("positions"), "shared");
  std::filesystem::remove(path);
  std::filesystem::remove(nn::sidecar_path(path));
}

}  // namespace
}  // namespace gesturelm::alignment
