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
#include <map>

#include "commands.hpp"
#include "gesturelm/error.hpp"

namespace gesturelm::cli {

motion::Skeleton load_skeleton(const RunConfig& c) {
  if (c.data.skeleton.empty()) return motion::Skeleton::upper_body();
  return motion::Skeleton::load(require_file(c.data.skeleton, "skeleton"));
}

data::Manifest load_manifest(const RunConfig& c) {
  return data::read_manifest(require_file(c.data.manifest, "manifest"));
}

std::optional<data::Split> split_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  return data::parse_split(s);
}

pipeline::Corpus load_inputs(const RunConfig& c, bool read_motion, int joints, std::optional<data::Split> only) {
  auto manifest = load_manifest(c);
  if (only) {
    std::erase_if(manifest.entries, [&](const data::ManifestEntry& e) { return e.split != *only; });
  }
  data::LoadOptions opts;
  opts.fps = c.data.fps;
  opts.joints = joints;
  opts.tolerance_frames = c.data.tolerance_frames;
  opts.read_motion = read_motion;
  auto corpus = pipeline::load_corpus(manifest, opts);
  write_json(fs::path(c.out) / "load_report.json", corpus.report);
  log("loaded " + std::to_string(corpus.report.loaded) + " utterances, skipped " +
      std::to_string(corpus.report.skipped));
  if (corpus.utterances.empty()) throw DataError("no usable utterances in " + c.data.manifest);
  return corpus;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// synth ---------------------------------------------------------------------

void add_synth_command(CLI::App& app) {
  auto cmd = std::make_shared<Command>();
  auto* sub = app.add_subcommand("synth", "Generate the synthetic gesture-disambiguation corpus");
  cmd->add_common(sub);
  auto& s = cmd->cfg.synth;
  auto& o = cmd->overrides;
  o.add(sub, "--p-cue", &s.p_cue, "Probability that an utterance carries the marker's motif");
  o.add(sub, "--noise", &s.noise, "Per-frame joint rotation noise (rad)");
  o.add(sub, "--train", &s.train, "Training utterances per task");
  o.add(sub, "--val", &s.val, "Validation utterances per task");
  o.add(sub, "--test", &s.test, "Test utterances per task");
  o.add(sub, "--speakers", &s.speakers, "Number of synthetic speakers");
  o.add(sub, "--fps", &s.fps, "Frame rate");
  o.add(sub, "--tasks", &s.tasks, "Tasks to generate")->delimiter(',');
  sub->callback([cmd] {
    cmd->resolve("synth");
    auto& c = cmd->cfg;
    c.synth.validate();
    cmd->write_snapshot();
    const auto manifest = data::generate_synthetic(c.synth, c.out);
    data::LoadOptions opts;
    opts.fps = c.synth.fps;
    opts.tolerance_frames = c.data.tolerance_frames;
    const auto report = data::stream_corpus(manifest, opts, [](data::CorpusItem&&) {});
    write_json(fs::path(c.out) / "load_report.json", report);
    std::map<std::string, std::map<std::string, int>> counts;
    for (const auto& e : manifest.entries) ++counts[e.task][data::to_string(e.split)];
    for (const auto& [task, splits] : counts) {
      std::printf("%-11s train %5d  val %4d  test %4d\n", task.c_str(), splits.count("train") ? splits.at("train") : 0,
                  splits.count("val") ? splits.at("val") : 0, splits.count("test") ? splits.at("test") : 0);
    }
    log("wrote " + std::to_string(manifest.entries.size()) + " utterances to " + c.out + " (" +
        std::to_string(report.skipped) + " failed to reload)");
    if (report.skipped > 0) throw DataError("generated corpus failed its reload check");
  });
}

// tokenizer -----------------------------------------------------------------

namespace {

void add_tokenizer_flags(CLI::App* sub, Command& cmd) {
  auto& o = cmd.overrides;
  auto& d = cmd.cfg.data;
  o.add(sub, "--manifest", &d.manifest, "Corpus manifest (JSON lines)");
  o.add(sub, "--skeleton", &d.skeleton, "Skeleton file (default: built-in 13-joint upper body)");
  o.add(sub, "--tolerance-frames", &d.tolerance_frames, "Allowed transcript/motion duration mismatch");
}

double reconstruction_mse(const motion::MotionSequence& a, const motion::MotionSequence& b) {
  const int n = std::min(a.frames(), b.frames());
  if (n == 0) return 0;
  return (a.data().topRows(n) - b.data().topRows(n)).squaredNorm() / static_cast<double>(a.data().topRows(n).size());
}

}  // namespace

void add_tokenizer_commands(CLI::App& app) {
  auto* group = app.add_subcommand("tokenizer", "VQ-VAE gesture tokenizer");
  group->require_subcommand(1);

  {
    auto cmd = std::make_shared<Command>();
    auto* sub = group->add_subcommand("train", "Train the tokenizer on the training split");
    cmd->add_common(sub);
    add_tokenizer_flags(sub, *cmd);
    auto& t = cmd->cfg.tokenizer;
    auto& o = cmd->overrides;
    o.add(sub, "--epochs", &t.epochs, "Training epochs");
    o.add(sub, "--lr", &t.lr, "Learning rate");
    o.add(sub, "--batch-size", &t.batch_size, "Windows per batch");
    o.add(sub, "--codebook-size", &t.codebook_size, "Codebook size K");
    o.add(sub, "--latent-dim", &t.latent_dim, "Latent width d");
    o.add(sub, "--chunks", &t.chunks, "Latents per window M");
    o.add(sub, "--window", &t.window, "Frames per window N");
    o.add(sub, "--layers", &t.layers, "Transformer layers in encoder and decoder");
    o.add(sub, "--heads", &t.heads, "Attention heads");
    o.add(sub, "--ffn-width", &t.ffn_width, "Feed-forward width (0: 4d)");
    o.add(sub, "--beta", &t.beta, "Commitment weight");
    o.add(sub, "--max-windows", &cmd->cfg.run.max_windows, "Subsample at most this many windows (0: all)");
    sub->callback([cmd] {
      cmd->resolve("tokenizer train");
      auto& c = cmd->cfg;
      const auto skeleton = load_skeleton(c);
      c.tokenizer.joints = static_cast<int>(skeleton.size());
      const auto corpus = load_inputs(c, true, c.tokenizer.joints);
      c.tokenizer.fps = corpus.fps;
      c.tokenizer.validate();
      cmd->write_snapshot();
      const auto windows =
          pipeline::tokenizer_windows(corpus, data::Split::train, c.tokenizer.window, c.run.max_windows, c.seed);
      if (windows.empty()) throw DataError("no training windows");
      log("training on " + std::to_string(windows.size()) + " windows");
      JsonLines train_log(fs::path(c.out) / "train_log.jsonl");
      auto result = tokenizer::train_tokenizer(windows, c.tokenizer, skeleton, [&](const tokenizer::EpochLog& e) {
        train_log.write({{"epoch", e.epoch}, {"train", e.train}});
        log("epoch " + std::to_string(e.epoch) + " loss " + fixed(e.train.total, 5) + " rec6d " +
            fixed(e.train.rec6d, 5));
      });
      result.model.save(fs::path(c.out) / "tokenizer.bin", c.tokenizer.epochs);
      log("wrote " + (fs::path(c.out) / "tokenizer.bin").string());
    });
  }

  auto checkpoint_command = [group](const std::string& name, const std::string& help, bool reconstruct) {
    auto cmd = std::make_shared<Command>();
    auto* sub = group->add_subcommand(name, help);
    cmd->add_common(sub);
    add_tokenizer_flags(sub, *cmd);
    cmd->overrides.add(sub, "--checkpoint,--tokenizer", &cmd->cfg.data.tokenizer, "Tokenizer checkpoint");
    cmd->overrides.add(sub, "--split", &cmd->cfg.run.split, "train, val, test or all");
    sub->callback([cmd, name, reconstruct] {
      cmd->resolve("tokenizer " + name);
      auto& c = cmd->cfg;
      const auto model = tokenizer::VqVae::load(require_file(c.data.tokenizer, "tokenizer checkpoint"));
      c.tokenizer = model.config();
      cmd->write_snapshot();
      auto corpus = load_inputs(c, true, model.config().joints, split_filter(c.run.split));
      pipeline::tokenize_corpus(corpus, model);
      if (!reconstruct) {
        JsonLines out(fs::path(c.out) / "tokens.jsonl");
        for (const auto& u : corpus.utterances) {
          json spans = json::array();
          for (const auto& s : u.vq.spans) spans.push_back({s.begin, s.end});
          out.write({{"id", u.id}, {"split", data::to_string(u.split)}, {"ids", u.vq.ids}, {"spans", spans}});
        }
        log("wrote tokens for " + std::to_string(corpus.utterances.size()) + " utterances");
        return;
      }
      std::ofstream csv(fs::path(c.out) / "reconstruction.csv");
      if (!csv) throw DataError("cannot write reconstruction.csv");
      csv << "id,split,frames,mse_6d\n";
      double sum = 0;
      for (const auto& u : corpus.utterances) {
        const double mse = reconstruction_mse(u.motion, tokenizer::reconstruct(u.vq, model));
        sum += mse;
        csv << u.id << ',' << data::to_string(u.split) << ',' << u.motion.frames() << ',' << fixed(mse, 8) << '\n';
      }
      std::printf("mean 6D MSE over %zu utterances: %.6f\n", corpus.utterances.size(),
                  sum / static_cast<double>(corpus.utterances.size()));
    });
  };
  checkpoint_command("tokenize", "Write gesture token ids and frame spans per utterance", false);
  checkpoint_command("reconstruct", "Write per-utterance 6D reconstruction MSE", true);
}

}  // namespace gesturelm::cli
