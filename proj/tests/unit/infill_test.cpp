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
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "gesturelm/error.hpp"
#include "gesturelm/infill/finetune.hpp"
#include "gesturelm/infill/metrics.hpp"
#include "gesturelm/infill/task.hpp"
#include "gesturelm/nn/module.hpp"

namespace gesturelm::infill {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gesturelm_infill_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

alignment::TimedTranscript transcript_of(const std::string& text, const std::string& id = "u") {
  alignment::TimedTranscript t;
  t.id = id;
  double clock = 0;
  for (const auto& w : lm::split_words(text)) {
    t.words.push_back({w, clock, clock + 0.2});
    clock += 0.2;
  }
  return t;
}

TEST(LabelSet, DefaultsMatchTheTaskLists) {
  const auto d = LabelSet::defaults("discourse");
  const auto q = LabelSet::defaults("quantifier");
  const auto s = LabelSet::defaults("stance");
  EXPECT_EQ(d.size(), 18u);
  EXPECT_EQ(q.size(), 17u);
  EXPECT_EQ(s.size(), 14u);
  EXPECT_GE(d.index_of("for example"), 0);
  EXPECT_GE(d.index_of("if then"), 0);
  EXPECT_EQ(s.markers.front(), "actually");
  EXPECT_EQ(q.markers.back(), "whole");
  for (const auto* set : {&d, &q, &s}) {
    EXPECT_EQ(std::set<std::string>(set->markers.begin(), set->markers.end()).size(), set->size());
  }
  EXPECT_THROW(LabelSet::defaults("sentiment"), UsageError);
}

TEST(LabelSet, LoadAndBind) {
  const auto dir = temp_dir("labels");
  {
    std::ofstream f(dir / "labels.txt");
    f << "but\n\nfor example\nso\n";
  }
  LabelSet l = LabelSet::load(dir / "labels.txt", "discourse");
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l.markers[1], "for example");

  lm::Vocab v = lm::build_vocab({"a b c"}, {"but", "for example"});
  EXPECT_THROW(l.bind(v), UsageError);
  v.add("so");
  l.bind(v);
  EXPECT_EQ(v.token(l.ids[1]), "for example");
}

TEST(FindMarkers, SingleAndMultiWord) {
  const auto stance = LabelSet::defaults("stance");
  auto occ = find_markers(lm::split_words("i really think so"), stance);
  ASSERT_EQ(occ.size(), 1u);
  EXPECT_EQ(occ[0].first_word, 1);
  EXPECT_EQ(stance.markers[occ[0].label], "really");

  const auto disc = LabelSet::defaults("discourse");
  occ = find_markers(lm::split_words("For Example we went"), disc);
  ASSERT_EQ(occ.size(), 1u);
  EXPECT_EQ(occ[0].first_word, 0);
  EXPECT_EQ(occ[0].last_word, 1);
  EXPECT_EQ(disc.markers[occ[0].label], "for example");

  occ = find_markers(lm::split_words("if then so"), disc);
  ASSERT_EQ(occ.size(), 2u);
  EXPECT_EQ(disc.markers[occ[0].label], "if then");
  EXPECT_EQ(disc.markers[occ[1].label], "so");
}

// Repeatedly takes the longest, then leftmost, match that overlaps nothing
// taken so far, rescanning all spans each round.
std::vector<Occurrence> brute_force_markers(const std::vector<std::string>& words, const LabelSet& labels) {
  std::vector<bool> used(words.size(), false);
  std::vector<Occurrence> out;
  while (true) {
    int best_len = 0, best_start = -1, best_label = -1;
    for (int len = static_cast<int>(words.size()); len >= 1 && best_start < 0; --len) {
      for (int s = 0; s + len <= static_cast<int>(words.size()); ++s) {
        std::string text;
        bool free = true;
        for (int w = s; w < s + len; ++w) {
          text += (w > s ? " " : "") + lm::lowercase(words[w]);
          free = free && !used[w];
        }
        const int l = labels.index_of(text);
        if (l >= 0 && free) {
          best_len = len;
          best_start = s;
          best_label = l;
          break;
        }
      }
    }
    if (best_start < 0) break;
    for (int w = best_start; w < best_start + best_len; ++w) used[w] = true;
    out.push_back({best_start, best_start + best_len - 1, best_label});
  }
  std::sort(out.begin(), out.end(), [](const Occurrence& a, const Occurrence& b) { return a.first_word < b.first_word; });
  return out;
}

TEST(FindMarkers, MatchesBruteForceScan) {
  const auto disc = LabelSet::defaults("discourse");
  const std::vector<std::string> pool = {"if", "then", "for", "example", "so", "but", "We", "IF", "then", "went",
                                         "though", "also", "when", "x"};
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> words(1 + rng() % 12);
    for (auto& w : words) w = pool[rng() % pool.size()];
    const auto got = find_markers(words, disc);
    const auto want = brute_force_markers(words, disc);
    ASSERT_EQ(got.size(), want.size()) << trial;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].first_word, want[i].first_word);
      EXPECT_EQ(got[i].last_word, want[i].last_word);
      EXPECT_EQ(got[i].label, want[i].label);
    }
  }
}

TEST(FrequencyFilter, StrictThreshold) {
  LabelSet l;
  l.task = "stance";
  l.markers = {"really", "very", "maybe"};
  const auto kept = frequency_filter(l, {30, 31, 100});
  EXPECT_EQ(kept.markers, (std::vector<std::string>{"very", "maybe"}));
  EXPECT_THROW(frequency_filter(l, {0, 0, 0}), DataError);
  EXPECT_THROW(frequency_filter(l, {1, 2}), UsageError);
}

TEST(FrequencyFilter, CountsMatchRecount) {
  const auto stance = LabelSet::defaults("stance");
  const std::vector<std::string> pool = {"really", "very", "maybe", "the", "cat", "very"};
  std::mt19937_64 rng(3);
  std::vector<alignment::TimedTranscript> ts;
  std::vector<long> want(stance.size(), 0);
  for (int i = 0; i < 200; ++i) {
    std::string text;
    for (int w = 0; w < 6; ++w) {
      const auto& word = pool[rng() % pool.size()];
      text += word + " ";
      if (const int l = stance.index_of(word); l >= 0) ++want[l];
    }
    ts.push_back(transcript_of(text));
  }
  EXPECT_EQ(count_markers(ts, stance), want);
}

struct InfillFixture : ::testing::Test {
  LabelSet labels = [] {
    LabelSet l;
    l.task = "discourse";
    l.markers = {"but", "so", "for example"};
    return l;
  }();
  lm::Vocab vocab = lm::build_vocab({"a b c d"}, {"but", "so", "for example"});
  void SetUp() override { labels.bind(vocab); }
  int id(const std::string& w) const { return static_cast<int>(vocab.id(w)); }
};

TEST_F(InfillFixture, ReplacesMarkerWithOneMask) {
  const auto t = transcript_of("a but b");
  const auto occ = find_markers(t, labels);
  ASSERT_EQ(occ.size(), 1u);
  const auto ex = build_infill_example(t, occ[0], labels, vocab);
  EXPECT_EQ(ex.input.text_ids,
            (std::vector<int>{0, id("a"), 2, id("b"), 1}));
  EXPECT_EQ(ex.input.text_positions, (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(ex.mask_slot, 2);
  EXPECT_EQ(labels.markers[ex.gold], "but");
  EXPECT_FALSE(ex.input.has_gestures());
}

TEST_F(InfillFixture, MultiWordAndSentenceInitial) {
  auto t = transcript_of("for example a b");
  auto occ = find_markers(t, labels);
  ASSERT_EQ(occ.size(), 1u);
  auto ex = build_infill_example(t, occ[0], labels, vocab);
  EXPECT_EQ(ex.input.text_ids, (std::vector<int>{0, 2, id("a"), id("b"), 1}));
  EXPECT_EQ(ex.mask_slot, 1);
  EXPECT_EQ(labels.markers[ex.gold], "for example");

  EXPECT_THROW(build_infill_example(t, Occurrence{3, 5, 0}, labels, vocab), UsageError);
}

TEST_F(InfillFixture, GesturePositionsFollowTheirTextSlot) {
  // "a but b c": one gesture token per word, 3 frames = 0.2 s at 15 fps.
  const auto t = transcript_of("a but b c");
  tokenizer::GestureTokenSeq g;
  g.ids = {tokenizer::bog_id(8), 0, 1, 2, 3, tokenizer::eog_id(8)};
  for (int i = 0; i < 4; ++i) g.spans.push_back({3 * i, 3 * i + 3});
  const auto pair = alignment::build_pair(t, g, 15.0, vocab, 8);
  ASSERT_EQ(pair.gesture_positions, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  const auto occ = find_markers(t, labels);
  const auto ex = build_infill_example(pair, occ[0], labels);
  EXPECT_EQ(ex.input.text_positions, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(ex.input.gesture_ids, pair.gesture_ids);
  EXPECT_EQ(ex.input.gesture_positions, (std::vector<int>{0, 1, 2, 3, 4, 5}));

  const auto windowed = restrict_gesture_window(ex, 1);
  EXPECT_EQ(windowed.input.gesture_ids, (std::vector<int>{tokenizer::bog_id(8), 0, 1, 2, tokenizer::eog_id(8)}));
  EXPECT_EQ(restrict_gesture_window(ex, 0).input.gesture_ids, ex.input.gesture_ids);
  EXPECT_FALSE(text_only(ex).input.has_gestures());
  EXPECT_EQ(text_only(ex).input.text_ids, ex.input.text_ids);
}

TEST(Predict, RestrictionTiesAndScaling) {
  nn::RowVector logits(4);
  logits << 1.0, 3.0, 3.0, -2.0;
  EXPECT_EQ(predict_marker(logits), 1);
  const nn::RowVector scaled = 7.5 * logits;
  EXPECT_EQ(predict_marker(scaled), 1);
  EXPECT_THROW(predict_marker(nn::RowVector()), UsageError);
}

lm::MaskedLM tiny_lm(const lm::Vocab& vocab, std::uint64_t seed = 5, nn::Index hidden = 32) {
  lm::LmConfig c;
  c.hidden = hidden;
  c.layers = 2;
  c.heads = 2;
  c.ffn_width = 2 * hidden;
  c.max_positions = 32;
  nn::Rng rng(seed);
  return lm::MaskedLM(c, vocab, rng);
}

void set_param(const lm::MaskedLM& m, const std::string& name, const std::function<void(nn::Matrix&)>& f) {
  for (auto& [n, t] : m.named_parameters()) {
    if (n == name) {
      auto t2 = t;
      f(t2.mutable_value());
      return;
    }
  }
  FAIL() << "no parameter " << name;
}

TEST_F(InfillFixture, PredictionStaysInsideLabelSet) {
  auto m = tiny_lm(vocab);
  // A non-label token dominates the full vocabulary; "so" leads the labels.
  set_param(m, "lm_head.bias", [&](nn::Matrix& b) {
    b.setZero();
    b(0, vocab.id("c")) = 100;
    b(0, vocab.id("so")) = 10;
  });
  const auto ex = build_infill_example(transcript_of("a but b"), {1, 1, 0}, labels, vocab);
  EXPECT_EQ(predict_marker(m, nullptr, ex, labels), labels.index_of("so"));

  LabelSet unbound = labels;
  unbound.ids.clear();
  EXPECT_THROW(predict_marker(m, nullptr, ex, unbound), UsageError);
}

TEST(Metrics, HandComputedCases) {
  const std::vector<std::string> names = {"A", "B"};
  auto r = evaluate({0, 1, 1, 0}, {0, 1, 1, 0}, names);
  EXPECT_DOUBLE_EQ(r.accuracy, 100.0);
  EXPECT_DOUBLE_EQ(r.macro_f1, 1.0);

  r = evaluate({0, 0, 1, 1}, {0, 0, 0, 0}, names);
  EXPECT_DOUBLE_EQ(r.accuracy, 50.0);
  EXPECT_NEAR(r.macro_f1, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(r.confusion, (Confusion{{2, 0}, {2, 0}}));

  // Absent class contributes 0 and is still averaged.
  r = evaluate({0, 0}, {0, 0}, {"A", "B", "C"});
  EXPECT_NEAR(r.macro_f1, 1.0 / 3.0, 1e-15);

  EXPECT_THROW(evaluate({}, {}, names), DataError);
  EXPECT_THROW(evaluate({0, 2}, {0, 0}, names), UsageError);
  EXPECT_THROW(evaluate({0}, {0, 1}, names), UsageError);
}

TEST(Metrics, MatchConfusionMatrixOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int L = 2 + static_cast<int>(rng() % 6);
    const int n = 1 + static_cast<int>(rng() % 60);
    std::vector<int> gold(n), pred(n);
    for (int i = 0; i < n; ++i) {
      gold[i] = static_cast<int>(rng() % L);
      pred[i] = rng() % 3 == 0 ? gold[i] : static_cast<int>(rng() % L);
    }
    std::vector<std::string> names(L, "x");
    for (int l = 0; l < L; ++l) names[l] += std::to_string(l);
    const auto r = evaluate(gold, pred, names);

    std::vector<std::vector<long>> cm(L, std::vector<long>(L, 0));
    for (int i = 0; i < n; ++i) ++cm[gold[i]][pred[i]];
    ASSERT_EQ(r.confusion, cm);
    long trace = 0;
    double f1_sum = 0;
    for (int c = 0; c < L; ++c) {
      trace += cm[c][c];
      long row = 0, col = 0;
      for (int k = 0; k < L; ++k) {
        row += cm[c][k];
        col += cm[k][c];
      }
      const double f1 = row + col == 0 ? 0.0 : 2.0 * cm[c][c] / static_cast<double>(row + col);
      EXPECT_NEAR(r.f1[c], f1, 1e-12);
      f1_sum += f1;
    }
    EXPECT_NEAR(r.macro_f1, f1_sum / L, 1e-12);
    EXPECT_EQ(r.accuracy, 100.0 * static_cast<double>(trace) / n);
    EXPECT_GE(r.macro_f1, 0.0);
    EXPECT_LE(r.macro_f1, 1.0);
  }
}

TEST(Metrics, ReportJsonRoundTrip) {
  auto r = evaluate({0, 1, 2, 2}, {0, 2, 2, 1}, {"a", "b", "c"});
  r.task = "stance";
  r.variant = "gesture";
  r.seed = 4;
  nlohmann::json j = r;
  const auto back = j.get<EvalReport>();
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(back.macro_f1, r.macro_f1);
  EXPECT_EQ(back.variant, "gesture");
  EXPECT_EQ(back.seed, 4u);
}

TEST(RelativeConfusion, HandComputedAndZeroRows) {
  const std::vector<std::string> names = {"x", "y"};
  const auto a = evaluate({0, 0}, {0, 0}, names);
  const auto b = evaluate({0, 0}, {0, 1}, names);
  const auto d = relative_confusion(a, b);
  EXPECT_EQ(d, (Confusion{{1, -1}, {0, 0}}));
  EXPECT_EQ(relative_confusion(a, a), (Confusion{{0, 0}, {0, 0}}));

  std::mt19937_64 rng(2);
  std::vector<int> gold(300), p1(300), p2(300);
  for (int i = 0; i < 300; ++i) {
    gold[i] = static_cast<int>(rng() % 5);
    p1[i] = static_cast<int>(rng() % 5);
    p2[i] = static_cast<int>(rng() % 5);
  }
  const std::vector<std::string> five = {"a", "b", "c", "d", "e"};
  for (const auto& row : relative_confusion(evaluate(gold, p1, five), evaluate(gold, p2, five))) {
    EXPECT_EQ(std::accumulate(row.begin(), row.end(), 0L), 0);
  }
  EXPECT_THROW(relative_confusion(a, evaluate({0, 0}, {0, 0}, {"x", "z"})), UsageError);
  EXPECT_THROW(relative_confusion(a, evaluate({0, 1}, {0, 0}, names)), UsageError);
}

TEST(RelativeConfusion, OrderingAndFiles) {
  const Confusion m = {{1, 0, 0}, {0, 5, 0}, {2, 0, 1}};
  EXPECT_EQ(frequency_order(m), (std::vector<int>{1, 2, 0}));
  const auto dir = temp_dir("cm");
  const Confusion diff = {{0, 0, 0}, {1, -1, 0}, {0, 2, -2}};
  write_confusion_csv(dir / "cm.csv", {"a", "b", "c"}, diff, {1, 2, 0});
  std::ifstream f(dir / "cm.csv");
  std::string header, row1;
  std::getline(f, header);
  std::getline(f, row1);
  EXPECT_EQ(header, "gold\\pred,b,c,a");
  EXPECT_EQ(row1, "b,-1,0,1");
  write_heatmap_svg(dir / "cm.svg", {"a", "b", "c"}, diff, {1, 2, 0}, "relative");
  std::ifstream svg(dir / "cm.svg");
  const std::string text((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("<svg"), std::string::npos);
  EXPECT_NE(text.find("</svg>"), std::string::npos);
}

TEST(Aggregate, MeanAndSampleStd) {
  auto [m, s] = mean_std({1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(m, 3.0);
  EXPECT_NEAR(s, std::sqrt(2.5), 1e-15);
  std::tie(m, s) = mean_std({0.7});
  EXPECT_EQ(s, 0.0);
  std::tie(m, s) = mean_std({0.4, 0.4, 0.4});
  EXPECT_EQ(s, 0.0);
}

EvalReport seeded_report(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> gold(50), pred(50);
  for (int i = 0; i < 50; ++i) {
    gold[i] = static_cast<int>(rng() % 3);
    pred[i] = rng() % 2 ? gold[i] : static_cast<int>(rng() % 3);
  }
  auto r = evaluate(gold, pred, {"a", "b", "c"});
  r.seed = seed;
  r.task = "quantifier";
  r.variant = "text_only";
  return r;
}

TEST(Aggregate, RunExperimentPersistsAndRecomputes) {
  const auto dir = temp_dir("experiment");
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  const auto agg = run_experiment(seeds, seeded_report, dir);
  EXPECT_EQ(agg.seeds, seeds);

  double acc_sum = 0;
  std::vector<double> acc;
  for (auto s : seeds) {
    std::ifstream f(dir / ("seed_" + std::to_string(s) + ".json"));
    ASSERT_TRUE(f) << s;
    const auto r = nlohmann::json::parse(f).get<EvalReport>();
    acc.push_back(r.accuracy);
    acc_sum += r.accuracy;
  }
  const double mean = acc_sum / 5;
  double ss = 0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  EXPECT_NEAR(agg.accuracy_mean, mean, 1e-12);
  EXPECT_NEAR(agg.accuracy_std, std::sqrt(ss / 4), 1e-12);

  std::ifstream f(dir / "aggregate.json");
  const auto j = nlohmann::json::parse(f);
  EXPECT_NEAR(j.at("accuracy_mean").get<double>(), mean, 1e-12);

  const auto again = run_experiment(seeds, seeded_report);
  EXPECT_EQ(again.accuracy, agg.accuracy);
  EXPECT_EQ(again.f1_std, agg.f1_std);

  try {
    run_experiment(seeds, [](std::uint64_t s) -> EvalReport {
      if (s == 3) throw NumericalError("diverged");
      return seeded_report(s);
    });
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("seed 3"), std::string::npos);
  }
}

// 16 text-only examples with random contexts and labels.
struct FinetuneFixture : ::testing::Test {
  LabelSet labels = [] {
    LabelSet l;
    l.task = "discourse";
    l.markers = {"but", "so", "because", "if"};
    return l;
  }();
  std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  lm::Vocab vocab = lm::build_vocab({"a b c d e f g h i j"}, {"but", "so", "because", "if"});
  std::vector<InfillExample> examples;

  void SetUp() override {
    labels.bind(vocab);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 16; ++i) {
      const int label = i % 4;
      std::string text;
      for (int w = 0; w < 5; ++w) text += words[rng() % words.size()] + " ";
      const int at = static_cast<int>(rng() % 6);
      auto ws = lm::split_words(text);
      ws.insert(ws.begin() + at, labels.markers[label]);
      std::string joined;
      for (const auto& w : ws) joined += w + " ";
      auto ex = build_infill_example(transcript_of(joined, "ex" + std::to_string(i)), {at, at, label}, labels, vocab);
      examples.push_back(ex);
    }
  }
};

TEST_F(FinetuneFixture, OnlyAdaptersChange) {
  auto m = tiny_lm(vocab);
  nn::Rng rng(1);
  m.inject_lora({4, 8}, rng);
  const auto snapshot = nn::ParameterSnapshot::take(m);
  FinetuneConfig cfg;
  cfg.epochs = 2;
  cfg.lora = {4, 8};
  finetune(m, nullptr, examples, examples, labels, cfg);
  const auto changed = snapshot.changed(m);
  EXPECT_FALSE(changed.empty());
  for (const auto& name : changed) EXPECT_NE(name.find(".lora_"), std::string::npos) << name;
}

TEST_F(FinetuneFixture, OverfitsSixteenExamples) {
  auto m = tiny_lm(vocab);
  FinetuneConfig cfg;
  cfg.epochs = 200;  // one 16-example batch per epoch
  cfg.batch_size = 16;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0;
  cfg.patience = 200;
  cfg.lora = {8, 16};
  const auto result = finetune(m, nullptr, examples, examples, labels, cfg);
  std::vector<int> gold;
  for (const auto& ex : examples) gold.push_back(ex.gold);
  const auto r = evaluate(gold, predict(m, nullptr, examples, labels), labels.markers);
  EXPECT_EQ(r.accuracy, 100.0);
  EXPECT_LE(result.best_epoch, 200);
}

TEST_F(FinetuneFixture, DeterministicAndChecksLabels) {
  FinetuneConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 4;
  auto a = tiny_lm(vocab);
  auto b = tiny_lm(vocab);
  const auto ra = finetune(a, nullptr, examples, examples, labels, cfg);
  const auto rb = finetune(b, nullptr, examples, examples, labels, cfg);
  ASSERT_EQ(ra.log.size(), rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) EXPECT_EQ(ra.log[i].train_loss, rb.log[i].train_loss);

  LabelSet other = labels;
  other.markers[0] = "when";
  auto c = tiny_lm(vocab);
  EXPECT_THROW(finetune(c, nullptr, examples, examples, other, cfg), UsageError);
  auto bad = examples;
  bad[0].gold = 9;
  EXPECT_THROW(finetune(c, nullptr, bad, examples, labels, cfg), DataError);
}

TEST_F(FinetuneFixture, LearnedGestureTableTrainsWithAdapters) {
  auto m = tiny_lm(vocab);
  nn::Rng rng(2);
  auto g = alignment::GestureEmbedder::learned(8, 32, rng);
  auto examples_g = examples;
  for (auto& ex : examples_g) {
    ex.input.gesture_vocab = 8;
    ex.input.gesture_ids = {tokenizer::bog_id(8), ex.gold, tokenizer::eog_id(8)};
    ex.input.gesture_positions = {0, ex.mask_slot, static_cast<int>(ex.input.text_ids.size()) - 1};
    ex.input.gesture_gold = {-1, -1, -1};
  }
  const auto snapshot = nn::ParameterSnapshot::take(g);
  FinetuneConfig cfg;
  cfg.epochs = 2;
  finetune(m, &g, examples_g, examples_g, labels, cfg);
  EXPECT_FALSE(snapshot.changed(g).empty());
}

}  // namespace
}  // namespace gesturelm::infill
