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
#include <numeric>
#include <set>

#include "commands.hpp"
#include "gesturelm/error.hpp"

namespace gesturelm::cli {

namespace {

using pipeline::Variant;

// Everything needed to rebuild a task's examples; stored as run.json.
struct TaskSpec {
  std::string task;
  Variant variant = Variant::text_only;
  std::vector<std::string> labels;  // empty: built-in list, frequency filtered
  long threshold = 30;
  int window = 0;
  std::string manifest, lm, tokenizer, skeleton;
  double fps = 0;
  int tolerance_frames = 4;
  tokenizer::GridSpec grid;
  int frames_per_token = 4;
  int window_frames = 32;
};

struct TaskInputs {
  pipeline::TaskData task;
  std::optional<tokenizer::VqVae> vq;
  int gesture_vocab = 0;
};

TaskInputs build_inputs(const TaskSpec& spec, const lm::Vocab& vocab, const RunConfig& c, bool test_only,
                        const std::string& labels_file) {
  const bool gestures = pipeline::uses_gestures(spec.variant);
  const auto source = pipeline::token_source(spec.variant);
  TaskInputs in;
  motion::Skeleton skeleton;
  int joints = 0;
  if (gestures && source == pipeline::TokenSource::vq) {
    in.vq = tokenizer::VqVae::load(require_file(spec.tokenizer, "tokenizer checkpoint"));
    in.gesture_vocab = in.vq->config().codebook_size;
    joints = in.vq->config().joints;
  } else if (gestures) {
    RunConfig sc = c;
    sc.data.skeleton = spec.skeleton;
    skeleton = load_skeleton(sc);
    spec.grid.validate();
    in.gesture_vocab = spec.grid.cells();
    joints = static_cast<int>(skeleton.size());
  }
  RunConfig lc = c;
  lc.data.manifest = spec.manifest;
  lc.data.fps = spec.fps;
  lc.data.tolerance_frames = spec.tolerance_frames;
  auto corpus = load_inputs(lc, gestures, joints, test_only ? std::optional(data::Split::test) : std::nullopt);
  if (in.vq) pipeline::tokenize_corpus(corpus, *in.vq);
  if (gestures && source == pipeline::TokenSource::grid) {
    pipeline::grid_tokenize_corpus(corpus, skeleton, spec.grid, spec.frames_per_token, spec.window_frames);
  }
  pipeline::TaskOptions opts;
  opts.threshold = spec.threshold;
  opts.window = spec.window;
  opts.gestures = gestures;
  opts.source = source;
  opts.gesture_vocab = in.gesture_vocab;
  opts.pair.positions = pipeline::position_scheme(spec.variant);
  if (!spec.labels.empty()) {
    opts.labels = infill::LabelSet{spec.task, spec.labels, {}};
  } else if (!labels_file.empty()) {
    opts.labels = infill::LabelSet::load(require_file(labels_file, "label list"), spec.task);
  }
  in.task = pipeline::build_task(corpus, spec.task, vocab, opts);
  return in;
}

json spec_json(const TaskSpec& s) {
  return {{"task", s.task},
          {"variant", pipeline::to_string(s.variant)},
          {"labels", s.labels},
          {"threshold", s.threshold},
          {"window", s.window},
          {"manifest", s.manifest},
          {"lm", s.lm},
          {"tokenizer", s.tokenizer},
          {"skeleton", s.skeleton},
          {"fps", s.fps},
          {"tolerance_frames", s.tolerance_frames},
          {"grid", s.grid},
          {"frames_per_token", s.frames_per_token},
          {"window_frames", s.window_frames}};
}

TaskSpec spec_from_json(const json& j) {
  TaskSpec s;
  try {
    s.task = j.at("task").get<std::string>();
    s.variant = pipeline::parse_variant(j.at("variant").get<std::string>());
    s.labels = j.at("labels").get<std::vector<std::string>>();
    s.threshold = j.at("threshold").get<long>();
    s.window = j.at("window").get<int>();
    s.manifest = j.at("manifest").get<std::string>();
    s.lm = j.at("lm").get<std::string>();
    s.tokenizer = j.at("tokenizer").get<std::string>();
    s.skeleton = j.at("skeleton").get<std::string>();
    s.fps = j.at("fps").get<double>();
    s.tolerance_frames = j.at("tolerance_frames").get<int>();
    tokenizer::read_config(j.at("grid"), s.grid);
    s.frames_per_token = j.at("frames_per_token").get<int>();
    s.window_frames = j.at("window_frames").get<int>();
  } catch (const json::exception& e) {
    throw DataError(std::string("run.json: ") + e.what());
  }
  return s;
}

fs::path seed_dir(const fs::path& run, std::uint64_t seed) { return run / ("seed_" + std::to_string(seed)); }

void print_aggregate(const infill::Aggregate& a) {
  std::printf("%-34s %-18s %s\n", "Model", "Accuracy (%)", "Macro F1");
  std::printf("%-34s %-18s %s\n", (a.task + "/" + a.variant).c_str(),
              (fixed(a.accuracy_mean, 1) + " +- " + fixed(a.accuracy_std, 1)).c_str(),
              (fixed(a.f1_mean, 3) + " +- " + fixed(a.f1_std, 3)).c_str());
}

// Seed reports of an eval output directory (or of <dir>/eval).
std::map<std::uint64_t, infill::EvalReport> read_seed_reports(fs::path dir) {
  if (!fs::exists(dir / "aggregate.json") && fs::exists(dir / "eval" / "aggregate.json")) dir /= "eval";
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::map<std::uint64_t, infill::EvalReport> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("seed_", 0) != 0 || entry.path().extension() != ".json") continue;
    auto report = read_json(entry.path()).get<infill::EvalReport>();
    out[report.seed] = std::move(report);
  }
  if (out.empty()) throw DataError("no seed reports in " + dir.string());
  return out;
}

infill::EvalReport summed(const std::map<std::uint64_t, infill::EvalReport>& reports,
                          const std::vector<std::uint64_t>& seeds) {
  infill::EvalReport sum = reports.at(seeds.front());
  for (std::size_t i = 1; i < seeds.size(); ++i) {
    const auto& r = reports.at(seeds[i]);
    if (r.labels != sum.labels) throw UsageError("mismatched label sets across seeds");
    for (std::size_t g = 0; g < sum.confusion.size(); ++g) {
      for (std::size_t p = 0; p < sum.confusion[g].size(); ++p) sum.confusion[g][p] += r.confusion[g][p];
    }
    sum.total += r.total;
  }
  return sum;
}

void relative_cm(const RunConfig& c) {
  if (c.run.relative_cm.size() != 2) throw UsageError("--relative-cm takes two directories");
  const auto a = read_seed_reports(c.run.relative_cm[0]);
  const auto b = read_seed_reports(c.run.relative_cm[1]);
  std::vector<std::uint64_t> seeds;
  for (const auto& [s, r] : a) {
    if (b.count(s)) seeds.push_back(s);
  }
  if (seeds.empty()) throw DataError("the two directories share no seeds");
  const auto ra = summed(a, seeds), rb = summed(b, seeds);
  if (ra.labels != rb.labels) throw UsageError("mismatched label sets between the two runs");
  const auto rel = infill::relative_confusion(ra, rb);
  const auto order = infill::frequency_order(ra.confusion);
  infill::write_confusion_csv(fs::path(c.out) / "relative_cm.csv", ra.labels, rel, order);
  infill::write_heatmap_svg(fs::path(c.out) / "relative_cm.svg", ra.labels, rel, order,
                            ra.variant + " minus " + rb.variant + " (" + ra.task + ")");
  write_json(fs::path(c.out) / "relative_cm.json",
             {{"a", c.run.relative_cm[0]}, {"b", c.run.relative_cm[1]}, {"seeds", seeds}, {"labels", ra.labels},
              {"matrix", rel}});
  log("wrote relative confusion over " + std::to_string(seeds.size()) + " seeds to " + c.out);
}

}  // namespace

void add_finetune_command(CLI::App& app) {
  auto cmd = std::make_shared<Command>();
  auto* sub = app.add_subcommand("finetune", "LoRA fine-tuning for marker infilling, one checkpoint per seed");
  cmd->add_common(sub);
  auto& c = cmd->cfg;
  auto& o = cmd->overrides;
  o.add(sub, "--task", &c.run.task, "discourse, quantifier or stance");
  o.add(sub, "--variant", &c.run.variant,
        "text_only, gesture, gesture_no_fa, gesture_abs_pos, grid_tokens or codebook_indices");
  o.add(sub, "--manifest", &c.data.manifest, "Corpus manifest");
  o.add(sub, "--lm", &c.data.lm, "Pretrained LM checkpoint");
  o.add(sub, "--tokenizer", &c.data.tokenizer, "Tokenizer checkpoint (VQ variants)");
  o.add(sub, "--alignment", &c.data.alignment, "Alignment checkpoint (gesture, gesture_abs_pos)");
  o.add(sub, "--skeleton", &c.data.skeleton, "Skeleton file (grid_tokens)");
  o.add(sub, "--labels", &c.data.labels, "Marker list file (default: built-in list)");
  o.add(sub, "--threshold", &c.run.threshold, "Keep markers with more training occurrences than this");
  o.add(sub, "--adversarial", &c.run.adversarial, "none, random_normal or positional_only");
  auto seeds = std::make_shared<std::string>();
  auto* seeds_opt = sub->add_option("--seeds", *seeds, "Seed count (5 -> 0..4) or list (0,3,7)");
  o.add_hook([&c, seeds, seeds_opt] {
    if (seeds_opt->count() > 0) c.run.seeds = parse_seeds(*seeds);
  });
  o.add(sub, "--epochs", &c.finetune.epochs, "Maximum epochs");
  o.add(sub, "--lr", &c.finetune.lr, "Learning rate");
  o.add(sub, "--batch-size", &c.finetune.batch_size, "Examples per batch");
  o.add(sub, "--patience", &c.finetune.patience, "Early-stopping patience (epochs)");
  o.add(sub, "--weight-decay", &c.finetune.weight_decay, "AdamW weight decay");
  o.add(sub, "--window", &c.finetune.gesture_window, "Gesture tokens kept around the mask (0: all)");
  o.add(sub, "--rank", &c.finetune.lora.rank, "LoRA rank");
  o.add(sub, "--alpha", &c.finetune.lora.alpha, "LoRA alpha");
  o.add(sub, "--projector-hidden", &c.align.projector_hidden, "Random projector width (gesture_no_fa; 0: LM width)");
  sub->callback([cmd] {
    cmd->resolve("finetune");
    auto& c = cmd->cfg;
    if (c.run.task.empty()) throw UsageError("finetune: --task is required");
    infill::LabelSet::defaults(c.run.task);
    const auto mode = alignment::parse_adversarial_mode(c.run.adversarial);
    c.finetune.validate();
    if (c.run.seeds.empty()) throw UsageError("finetune: no seeds");

    TaskSpec spec;
    spec.task = c.run.task;
    spec.variant = pipeline::parse_variant(c.run.variant);
    spec.threshold = c.run.threshold;
    spec.window = c.finetune.gesture_window;
    spec.manifest = fs::absolute(require_file(c.data.manifest, "manifest")).string();
    spec.lm = fs::absolute(require_file(c.data.lm, "LM checkpoint")).string();
    spec.fps = c.data.fps;
    spec.tolerance_frames = c.data.tolerance_frames;
    const bool gestures = pipeline::uses_gestures(spec.variant);
    const auto source = pipeline::token_source(spec.variant);
    if (mode != alignment::AdversarialMode::none && !gestures) {
      throw UsageError("adversarial modes need a gesture variant");
    }

    std::optional<alignment::AlignmentModules> aligned;
    if (spec.variant == Variant::gesture || spec.variant == Variant::gesture_abs_pos) {
      aligned = alignment::load_alignment(require_file(c.data.alignment, "alignment checkpoint"));
      const auto want = alignment::to_string(pipeline::position_scheme(spec.variant));
      const auto have = aligned->meta.value("positions", std::string("shared"));
      if (have != want) {
        throw UsageError("variant " + c.run.variant + " needs an alignment checkpoint trained with positions=" +
                         want + ", got " + have);
      }
      if (spec.tokenizer.empty() && c.data.tokenizer.empty()) {
        c.data.tokenizer = aligned->meta.value("tokenizer", std::string());
      }
    }
    if (gestures && source == pipeline::TokenSource::vq) {
      spec.tokenizer = fs::absolute(require_file(c.data.tokenizer, "tokenizer checkpoint")).string();
    }
    if (gestures && source == pipeline::TokenSource::grid) {
      if (!c.data.skeleton.empty()) spec.skeleton = fs::absolute(require_file(c.data.skeleton, "skeleton")).string();
      spec.grid = c.grid;
      spec.frames_per_token = c.tokenizer.frames_per_token();
      spec.window_frames = c.tokenizer.window;
    }
    cmd->write_snapshot();

    const auto base = lm::MaskedLM::load(spec.lm);
    auto in = build_inputs(spec, base.vocab(), c, false, c.data.labels);
    spec.labels = in.task.labels.markers;
    if (aligned && aligned->gestures.vocab() != in.gesture_vocab) {
      throw UsageError("alignment checkpoint has " + std::to_string(aligned->gestures.vocab()) +
                       " gesture ids but the tokenizer has " + std::to_string(in.gesture_vocab));
    }
    log(spec.task + ": " + std::to_string(in.task.labels.size()) + " markers, " +
        std::to_string(in.task.train.size()) + "/" + std::to_string(in.task.val.size()) + "/" +
        std::to_string(in.task.test.size()) + " train/val/test examples");

    pipeline::VariantResources res;
    res.lm = &base;
    if (aligned && spec.variant == Variant::gesture) res.aligned = &aligned->gestures;
    if (aligned && spec.variant == Variant::gesture_abs_pos) res.aligned_sequential = &aligned->gestures;
    if (in.vq) res.codebook = &in.vq->codebook().value();
    res.projector_hidden = c.align.projector_hidden > 0 ? c.align.projector_hidden : base.hidden();
    if (source == pipeline::TokenSource::grid) res.grid_cells = spec.grid.cells();

    json run = spec_json(spec);
    run["adversarial"] = c.run.adversarial;
    run["seeds"] = c.run.seeds;
    run["train_counts"] = in.task.train_counts;
    run["sizes"] = {{"train", in.task.train.size()}, {"val", in.task.val.size()}, {"test", in.task.test.size()}};
    run["finetune"] = c.finetune;
    write_json(fs::path(c.out) / "run.json", run);

    for (const auto seed : c.run.seeds) {
      auto ft = c.finetune;
      ft.seed = seed;
      const auto dir = seed_dir(c.out, seed);
      prepare_output_dir(dir);
      JsonLines train_log(dir / "train_log.jsonl");
      const auto tuned = pipeline::finetune_variant(
          spec.variant, in.task, res, ft, {mode, seed}, [&](const infill::FinetuneEpoch& e) {
            train_log.write({{"epoch", e.epoch},
                             {"train_loss", e.train_loss},
                             {"val_accuracy", e.val_accuracy},
                             {"val_f1", e.val_f1}});
            log("seed " + std::to_string(seed) + " epoch " + std::to_string(e.epoch) + " loss " +
                fixed(e.train_loss, 4) + " val acc " + fixed(e.val_accuracy, 1) + " val F1 " + fixed(e.val_f1, 3));
          });
      const json meta = {{"task", spec.task},
                         {"variant", pipeline::to_string(spec.variant)},
                         {"seed", seed},
                         {"best_epoch", tuned.training.best_epoch},
                         {"best_val_f1", tuned.training.best_val_f1}};
      tuned.model.save(dir / "lm.bin", meta);
      if (tuned.gestures) {
        nn::Rng rng(seed);
        const auto head = aligned ? aligned->head
                                  : alignment::GestureHead(tuned.gestures->width(), tuned.gestures->vocab(), rng);
        alignment::save_alignment(dir / "gestures.bin", *tuned.gestures, head, meta);
      }
    }
    log("wrote " + std::to_string(c.run.seeds.size()) + " fine-tuned checkpoints to " + c.out);
  });
}

void add_eval_command(CLI::App& app) {
  auto cmd = std::make_shared<Command>();
  auto* sub = app.add_subcommand("eval", "Test-split evaluation of a fine-tuning run, or a relative confusion matrix");
  cmd->add_common(sub, false);
  auto& c = cmd->cfg;
  auto& o = cmd->overrides;
  o.add(sub, "--run", &c.run.run, "Fine-tuning run directory");
  o.add(sub, "--manifest", &c.data.manifest, "Evaluate on this manifest instead of the run's");
  o.add(sub, "--adversarial", &c.run.adversarial, "none, random_normal or positional_only");
  auto seeds = std::make_shared<std::string>();
  auto* seeds_opt = sub->add_option("--seeds", *seeds, "Seed count (5 -> 0..4) or list (0,3,7)");
  o.add_hook([&c, seeds, seeds_opt] {
    if (seeds_opt->count() > 0) c.run.seeds = parse_seeds(*seeds);
  });
  o.add(sub, "--relative-cm", &c.run.relative_cm, "Two eval (or run) directories: writes A minus B")
      ->expected(2);
  cmd->default_out = [](const RunConfig& rc) -> std::string {
    if (rc.run.run.empty()) return {};
    const auto mode = rc.run.adversarial == "none" ? std::string("eval") : "eval_" + rc.run.adversarial;
    return (fs::path(rc.run.run) / mode).string();
  };
  sub->callback([cmd] {
    cmd->resolve("eval");
    auto& c = cmd->cfg;
    cmd->write_snapshot();
    if (!c.run.relative_cm.empty()) {
      relative_cm(c);
      return;
    }
    if (c.run.run.empty()) throw UsageError("eval: --run or --relative-cm is required");
    const fs::path run_dir = c.run.run;
    const auto run = read_json(require_file((run_dir / "run.json").string(), "run.json"));
    auto spec = spec_from_json(run);
    if (!c.data.manifest.empty()) spec.manifest = c.data.manifest;
    spec.threshold = -1;  // the run's filtered labels are kept as they are
    const auto mode = alignment::parse_adversarial_mode(c.run.adversarial);
    if (c.run.seeds.empty()) throw UsageError("eval: no seeds");
    for (const auto s : c.run.seeds) {
      require_file((seed_dir(run_dir, s) / "lm.bin").string(), "fine-tuned checkpoint for seed " + std::to_string(s));
    }
    const auto first = lm::MaskedLM::load(seed_dir(run_dir, c.run.seeds.front()) / "lm.bin");
    const auto in = build_inputs(spec, first.vocab(), c, true, {});
    if (in.task.test.empty()) throw DataError("no test examples for " + spec.task);
    if (in.task.labels.markers != spec.labels) throw UsageError("mismatched label sets");
    const auto agg = infill::run_experiment(
        c.run.seeds,
        [&](std::uint64_t seed) {
          const auto dir = seed_dir(run_dir, seed);
          const auto model = lm::MaskedLM::load(dir / "lm.bin");
          std::optional<alignment::AlignmentModules> g;
          if (pipeline::uses_gestures(spec.variant)) {
            g = alignment::load_alignment(require_file((dir / "gestures.bin").string(), "gesture checkpoint"));
          }
          auto report = pipeline::evaluate_variant(model, g ? &g->gestures : nullptr, spec.variant, in.task, seed,
                                                   {mode, seed});
          std::vector<int> order(report.labels.size());
          std::iota(order.begin(), order.end(), 0);
          infill::write_confusion_csv(fs::path(c.out) / ("confusion_seed_" + std::to_string(seed) + ".csv"),
                                      report.labels, report.confusion, order);
          log("seed " + std::to_string(seed) + ": accuracy " + fixed(report.accuracy, 2) + ", macro F1 " +
              fixed(report.macro_f1, 3));
          return report;
        },
        c.out);
    print_aggregate(agg);
  });
}

}  // namespace gesturelm::cli
