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


#include <cstdio>
#include <fstream>

#include "commands.hpp"
#include "gesturelm/error.hpp"

namespace gesturelm::cli {

void add_lm_commands(CLI::App& app) {
  auto* group = app.add_subcommand("lm", "Text masked language model");
  group->require_subcommand(1);
  auto cmd = std::make_shared<Command>();
  auto* sub = group->add_subcommand("pretrain", "Pretrain the desk-scale masked LM on training transcripts");
  cmd->add_common(sub);
  auto& c = cmd->cfg;
  auto& o = cmd->overrides;
  o.add(sub, "--manifest", &c.data.manifest, "Corpus manifest");
  o.add(sub, "--tasks", &c.run.tasks, "Tasks whose markers enter the vocabulary")->delimiter(',');
  o.add(sub, "--hidden", &c.lm.hidden, "Hidden width");
  o.add(sub, "--layers", &c.lm.layers, "Transformer layers");
  o.add(sub, "--heads", &c.lm.heads, "Attention heads");
  o.add(sub, "--ffn-width", &c.lm.ffn_width, "Feed-forward width");
  o.add(sub, "--max-positions", &c.lm.max_positions, "Position table size");
  o.add(sub, "--epochs", &c.mlm.epochs, "Pretraining epochs");
  o.add(sub, "--lr", &c.mlm.lr, "Learning rate");
  o.add(sub, "--batch-size", &c.mlm.batch_size, "Sentences per batch");
  o.add(sub, "--mask-prob", &c.mlm.mask_prob, "Token masking probability");
  sub->callback([cmd] {
    cmd->resolve("lm pretrain");
    auto& c = cmd->cfg;
    c.lm.validate();
    c.mlm.validate();
    cmd->write_snapshot();
    const auto corpus = load_inputs(c, false, 0);
    auto vocab = pipeline::corpus_vocab(corpus, c.run.tasks);
    const auto sentences = pipeline::mlm_sentences(corpus, data::Split::train, vocab);
    if (sentences.empty()) throw DataError("no training transcripts");
    nn::Rng rng(c.lm.seed);
    lm::MaskedLM model(c.lm, vocab, rng);
    log("vocabulary " + std::to_string(vocab.size()) + ", " + std::to_string(sentences.size()) + " sentences, " +
        std::to_string(lm::count_parameters(model, false)) + " parameters");
    JsonLines train_log(fs::path(c.out) / "train_log.jsonl");
    lm::pretrain_mlm(model, sentences, c.mlm, [&](const lm::MlmEpoch& e) {
      train_log.write({{"epoch", e.epoch}, {"train_loss", e.train_loss}});
      log("epoch " + std::to_string(e.epoch) + " mlm loss " + fixed(e.train_loss, 5));
    });
    model.save(fs::path(c.out) / "lm.bin");
    vocab.save(fs::path(c.out) / "vocab.txt");
    log("wrote " + (fs::path(c.out) / "lm.bin").string());
  });
}

namespace {

struct AlignInputs {
  lm::MaskedLM lm;
  tokenizer::VqVae tokenizer;
  std::vector<alignment::PairedExample> train, val;
};

void add_align_flags(CLI::App* sub, Command& cmd) {
  auto& c = cmd.cfg;
  auto& o = cmd.overrides;
  o.add(sub, "--manifest", &c.data.manifest, "Corpus manifest");
  o.add(sub, "--lm", &c.data.lm, "Pretrained LM checkpoint");
  o.add(sub, "--tokenizer", &c.data.tokenizer, "Tokenizer checkpoint");
  o.add(sub, "--epochs", &c.align.epochs, "Maximum epochs");
  o.add(sub, "--lr", &c.align.lr, "Learning rate");
  o.add(sub, "--batch-size", &c.align.batch_size, "Pairs per batch");
  o.add(sub, "--patience", &c.align.patience, "Early-stopping patience (epochs)");
  o.add(sub, "--projector-hidden", &c.align.projector_hidden, "Projector hidden width (0: LM width)");
  o.add(sub, "--positions", &c.align.positions, "Gesture positions: shared or sequential");
}

AlignInputs load_align_inputs(Command& cmd) {
  auto& c = cmd.cfg;
  auto model = lm::MaskedLM::load(require_file(c.data.lm, "LM checkpoint"));
  auto vq = tokenizer::VqVae::load(require_file(c.data.tokenizer, "tokenizer checkpoint"));
  c.align.validate();
  cmd.write_snapshot();
  auto corpus = load_inputs(c, true, vq.config().joints);
  pipeline::tokenize_corpus(corpus, vq);
  alignment::PairOptions pair;
  pair.positions = alignment::parse_position_scheme(c.align.positions);
  const int K = vq.config().codebook_size;
  auto train = pipeline::paired_examples(corpus, data::Split::train, model.vocab(), pipeline::TokenSource::vq, K, pair);
  auto val = pipeline::paired_examples(corpus, data::Split::val, model.vocab(), pipeline::TokenSource::vq, K, pair);
  if (train.empty()) throw DataError("no training pairs");
  log(std::to_string(train.size()) + " training pairs, " + std::to_string(val.size()) + " validation pairs");
  return {std::move(model), std::move(vq), std::move(train), std::move(val)};
}

}  // namespace

void add_align_commands(CLI::App& app) {
  auto* group = app.add_subcommand("align", "Gesture/text feature alignment");
  group->require_subcommand(1);

  {
    auto cmd = std::make_shared<Command>();
    auto* sub = group->add_subcommand("train", "Train projector and gesture head with L_MGP + L_MLM");
    cmd->add_common(sub);
    add_align_flags(sub, *cmd);
    auto& c = cmd->cfg;
    auto mask = std::make_shared<double>(0);
    auto* mask_opt = sub->add_option("--mask", *mask, "Masking rate for both modalities");
    cmd->overrides.add_hook([&c, mask, mask_opt] {
      if (mask_opt->count() > 0) c.align.mask_text = c.align.mask_gesture = *mask;
    });
    cmd->overrides.add(sub, "--mask-text", &c.align.mask_text, "Text masking rate");
    cmd->overrides.add(sub, "--mask-gesture", &c.align.mask_gesture, "Gesture masking rate");
    sub->callback([cmd] {
      cmd->resolve("align train");
      auto& c = cmd->cfg;
      auto in = load_align_inputs(*cmd);
      const auto width = in.lm.hidden();
      nn::Rng rng(c.align.seed);
      const auto hidden = c.align.projector_hidden > 0 ? c.align.projector_hidden : width;
      auto gestures =
          alignment::GestureEmbedder::from_codebook(in.tokenizer.codebook().value(), hidden, width, rng);
      alignment::GestureHead head(width, in.tokenizer.config().codebook_size, rng);
      const auto before = nn::ParameterSnapshot::take(in.lm);
      JsonLines train_log(fs::path(c.out) / "train_log.jsonl");
      const auto result =
          alignment::train_alignment(in.lm, gestures, head, in.train, in.val, c.align, [&](const alignment::AlignEpoch& e) {
            train_log.write({{"epoch", e.epoch}, {"train", e.train}, {"val", e.val}});
            log("epoch " + std::to_string(e.epoch) + " train L_FA " + fixed(e.train.fa, 4) + " val L_FA " +
                fixed(e.val.fa, 4) + " (mlm " + fixed(e.val.mlm, 4) + ", mgp " + fixed(e.val.mgp, 4) + ")");
          });
      const auto changed = before.changed(in.lm);
      if (!changed.empty()) throw std::logic_error("alignment modified LM parameter " + changed.front());
      log("frozen LM check: " + std::to_string(before.values.size()) + " LM tensors bitwise unchanged");
      json extra = {{"positions", c.align.positions},
                    {"mask_text", c.align.mask_text},
                    {"mask_gesture", c.align.mask_gesture},
                    {"best_epoch", result.best_epoch},
                    {"best_val", result.best_val},
                    {"tokenizer", c.data.tokenizer},
                    {"lm", c.data.lm}};
      alignment::save_alignment(fs::path(c.out) / "alignment.bin", gestures, head, extra);
      log("best epoch " + std::to_string(result.best_epoch) + ", val L_FA " + fixed(result.best_val.fa, 4));
    });
  }

  {
    auto cmd = std::make_shared<Command>();
    auto* sub = group->add_subcommand("ablate-masking", "Validation loss for several masking percentages");
    cmd->add_common(sub);
    add_align_flags(sub, *cmd);
    auto& c = cmd->cfg;
    cmd->overrides.add(sub, "--pcts", &c.run.pcts, "Masking percentages")->delimiter(',');
    cmd->overrides.add(sub, "--eval-pct", &c.run.eval_pct,
                       "Validate every rate at this percentage (0: at the training rate)");
    sub->callback([cmd] {
      cmd->resolve("align ablate-masking");
      auto& c = cmd->cfg;
      if (c.run.pcts.empty()) throw UsageError("--pcts needs at least one percentage");
      std::vector<double> rates;
      for (double p : c.run.pcts) {
        if (!(p > 0 && p < 100)) throw UsageError("masking percentages must lie in (0, 100)");
        rates.push_back(p / 100.0);
      }
      if (c.run.eval_pct < 0 || c.run.eval_pct >= 100) throw UsageError("--eval-pct must lie in [0, 100)");
      auto in = load_align_inputs(*cmd);
      if (in.val.empty()) throw DataError("the masking sweep needs a validation split");
      const auto points = pipeline::masking_sweep(in.lm, in.tokenizer.codebook().value(), in.train, in.val, c.align,
                                                  rates, c.run.eval_pct / 100.0);
      std::ofstream csv(fs::path(c.out) / "masking_sweep.csv");
      if (!csv) throw DataError("cannot write masking_sweep.csv");
      csv << "masking_pct,val_loss,val_mlm,val_mgp\n";
      json rows = json::array();
      std::printf("%-12s %s\n", "Masking %", "Validation loss");
      for (const auto& p : points) {
        const double pct = p.rate * 100.0;
        csv << fixed(pct, 0) << ',' << fixed(p.val.fa, 6) << ',' << fixed(p.val.mlm, 6) << ',' << fixed(p.val.mgp, 6)
            << '\n';
        rows.push_back({{"masking_pct", pct}, {"val", p.val}});
        std::printf("%-12s %.2f\n", (fixed(pct, 0) + "%").c_str(), p.val.fa);
      }
      write_json(fs::path(c.out) / "masking_sweep.json", rows);
    });
  }
}

}  // namespace gesturelm::cli
