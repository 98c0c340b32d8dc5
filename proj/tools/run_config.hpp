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


// Resolved configuration of one gesturelm invocation. A config file holds
// any subset of these sections; the snapshot written next to every output
// holds all of them and reproduces the run on its own.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gesturelm/alignment/model.hpp"
#include "gesturelm/data/synthetic.hpp"
#include "gesturelm/infill/finetune.hpp"
#include "gesturelm/lm/model.hpp"
#include "gesturelm/tokenizer/grid.hpp"
#include "gesturelm/tokenizer/vqvae.hpp"

namespace gesturelm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct DataSection {
  std::string manifest;
  std::string skeleton;  // empty: built-in upper body
  std::string tokenizer;
  std::string lm;
  std::string alignment;
  std::string labels;    // optional marker list, one per line
  double fps = 0;
  int tolerance_frames = 4;
};

struct RunSection {
  std::string task;
  std::string variant = "gesture";
  std::string adversarial = "none";
  std::string split = "all";
  std::string run;  // fine-tuning run directory (eval)
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  long threshold = 30;
  std::size_t max_windows = 0;
  std::vector<std::string> tasks = {"discourse", "quantifier", "stance"};
  std::vector<double> pcts = {10, 30, 50, 80};
  double eval_pct = 0;  // 0: each rate validated at its own rate
  std::vector<std::string> relative_cm;
};

struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::string out;
  bool deterministic = false;
  DataSection data;
  RunSection run;
  data::SynthConfig synth;
  tokenizer::TokenizerConfig tokenizer;
  tokenizer::GridSpec grid;
  lm::LmConfig lm;
  lm::MlmConfig mlm;
  alignment::AlignConfig align;
  infill::FinetuneConfig finetune;

  void set_seed(std::uint64_t s);
};

json to_json(const RunConfig& c);
// Applies a config file over `c`: the global seed first, then the sections.
// Unknown keys throw UsageError.
void apply_config_file(const fs::path& path, RunConfig& c);

// "5" -> 0..4; "0,3,7" -> {0, 3, 7}; "3," -> {3}.
std::vector<std::uint64_t> parse_seeds(const std::string& s);

// Flags registered here are copied into the config only when given, after
// the config file has been applied.
class Overrides {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, T* target, const std::string& help) {
    auto holder = std::make_shared<T>();
    auto* opt = app->add_option(name, *holder, help);
    appliers_.push_back([opt, holder, target] {
      if (opt->count() > 0) *target = *holder;
    });
    return opt;
  }
  CLI::Option* add_flag(CLI::App* app, const std::string& name, bool* target, const std::string& help);
  void add_hook(std::function<void()> fn) { appliers_.push_back(std::move(fn)); }
  void apply() const {
    for (const auto& f : appliers_) f();
  }

 private:
  std::vector<std::function<void()>> appliers_;
};

// Shared state of one subcommand: the config, its flag overrides and the
// --config path.
struct Command {
  RunConfig cfg;
  Overrides overrides;
  std::string config_path;
  // Output directory used when neither the file nor the flags give one.
  std::function<std::string(const RunConfig&)> default_out;

  // --config, --out, --seed, --deterministic.
  void add_common(CLI::App* app, bool out_required = true);
  // Defaults, then file, then flags; validates and prepares --out.
  void resolve(const std::string& name);
  fs::path out() const { return cfg.out; }
  void write_snapshot() const;
};

// Creates the directory and checks it accepts files; DataError otherwise.
void prepare_output_dir(const fs::path& dir);
fs::path require_file(const std::string& path, const std::string& what);
void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

class JsonLines {
 public:
  explicit JsonLines(const fs::path& path);
  void write(const json& j);

 private:
  std::ofstream out_;
};

void log(const std::string& message);

}  // namespace gesturelm::cli
