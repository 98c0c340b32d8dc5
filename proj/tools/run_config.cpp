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


#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <iostream>

#include <Eigen/Core>

#include "gesturelm/config_reader.hpp"
#include "gesturelm/error.hpp"

namespace gesturelm::cli {

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  synth.seed = tokenizer.seed = lm.seed = mlm.seed = align.seed = finetune.seed = s;
}

namespace {

json data_json(const DataSection& d) {
  return {{"manifest", d.manifest}, {"skeleton", d.skeleton},   {"tokenizer", d.tokenizer},
          {"lm", d.lm},             {"alignment", d.alignment}, {"labels", d.labels},
          {"fps", d.fps},           {"tolerance_frames", d.tolerance_frames}};
}

void read_data(const json& j, DataSection& d) {
  ConfigReader r(j, "data");
  r.get("manifest", d.manifest);
  r.get("skeleton", d.skeleton);
  r.get("tokenizer", d.tokenizer);
  r.get("lm", d.lm);
  r.get("alignment", d.alignment);
  r.get("labels", d.labels);
  r.get("fps", d.fps);
  r.get("tolerance_frames", d.tolerance_frames);
  r.finish();
}

json run_json(const RunSection& s) {
  return {{"task", s.task},
          {"variant", s.variant},
          {"adversarial", s.adversarial},
          {"split", s.split},
          {"run", s.run},
          {"seeds", s.seeds},
          {"threshold", s.threshold},
          {"max_windows", s.max_windows},
          {"tasks", s.tasks},
          {"pcts", s.pcts},
          {"eval_pct", s.eval_pct},
          {"relative_cm", s.relative_cm}};
}

void read_run(const json& j, RunSection& s) {
  ConfigReader r(j, "run");
  r.get("task", s.task);
  r.get("variant", s.variant);
  r.get("adversarial", s.adversarial);
  r.get("split", s.split);
  r.get("run", s.run);
  r.get("seeds", s.seeds);
  r.get("threshold", s.threshold);
  r.get("max_windows", s.max_windows);
  r.get("tasks", s.tasks);
  r.get("pcts", s.pcts);
  r.get("eval_pct", s.eval_pct);
  r.get("relative_cm", s.relative_cm);
  r.finish();
}

}  // namespace

json to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["deterministic"] = c.deterministic;
  j["data"] = data_json(c.data);
  j["run"] = run_json(c.run);
  j["synth"] = c.synth;
  j["tokenizer"] = c.tokenizer;
  j["grid"] = c.grid;
  j["lm"] = c.lm;
  j["mlm"] = c.mlm;
  j["align"] = c.align;
  j["finetune"] = c.finetune;
  return j;
}

void apply_config_file(const fs::path& path, RunConfig& c) {
  json j;
  {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path.string());
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError("config file " + path.string() + ": " + e.what());
    }
  }
  ConfigReader r(j, path.filename().string());
  std::string command;
  r.get("command", command);  // informational (snapshots)
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    r.get("seed", s);
    c.set_seed(s);
  }
  r.get("out", c.out);
  r.get("deterministic", c.deterministic);
  read_data(r.child("data"), c.data);
  read_run(r.child("run"), c.run);
  data::read_config(r.child("synth"), c.synth);
  tokenizer::read_config(r.child("tokenizer"), c.tokenizer);
  tokenizer::read_config(r.child("grid"), c.grid);
  lm::read_config(r.child("lm"), c.lm);
  lm::read_config(r.child("mlm"), c.mlm);
  alignment::read_config(r.child("align"), c.align);
  infill::read_config(r.child("finetune"), c.finetune);
  r.finish();
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start < s.size() || (start == 0 && s.empty())) {
    const auto comma = std::min(s.find(',', start), s.size());
    const std::string item = s.substr(start, comma - start);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw UsageError("bad seed list '" + s + "'");
    }
    out.push_back(v);
    start = comma + 1;
  }
  if (s.find(',') == std::string::npos) {
    if (out.front() == 0) throw UsageError("--seeds needs at least one seed");
    const auto n = out.front();
    out.clear();
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(i);
  }
  return out;
}

CLI::Option* Overrides::add_flag(CLI::App* app, const std::string& name, bool* target, const std::string& help) {
  auto* opt = app->add_flag(name, help);
  appliers_.push_back([opt, target] {
    if (opt->count() > 0) *target = true;
  });
  return opt;
}

void Command::add_common(CLI::App* app, bool out_required) {
  app->add_option("--config", config_path, "JSON config file (flags override its values)")
      ->check(CLI::ExistingFile);
  auto* out = overrides.add(app, "--out", &cfg.out, "Output directory");
  if (out_required) out->description("Output directory (required here or in the config)");
  auto seed = std::make_shared<std::uint64_t>(0);
  auto* seed_opt = app->add_option("--seed", *seed, "Global seed for every stage");
  overrides.add_hook([this, seed, seed_opt] {
    if (seed_opt->count() > 0) cfg.set_seed(*seed);
  });
  overrides.add_flag(app, "--deterministic", &cfg.deterministic, "Single-threaded numeric paths");
}

void Command::resolve(const std::string& name) {
  cfg.command = name;
  if (!config_path.empty()) apply_config_file(config_path, cfg);
  overrides.apply();
  if (cfg.out.empty() && default_out) cfg.out = default_out(cfg);
  if (cfg.out.empty()) throw UsageError(name + ": --out is required");
  if (cfg.deterministic) Eigen::setNbThreads(1);
  prepare_output_dir(cfg.out);
}

void Command::write_snapshot() const { write_json(fs::path(cfg.out) / "resolved_config.json", to_json(cfg)); }

void prepare_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".gesturelm_write_probe";
  {
    std::ofstream f(probe);
    if (!f || !(f << "ok") || !f.flush()) throw DataError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

fs::path require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError("missing " + what + " path");
  if (!fs::exists(path)) throw DataError(what + " not found: " + path);
  return path;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

JsonLines::JsonLines(const fs::path& path) : out_(path) {
  if (!out_) throw DataError("cannot write " + path.string());
}

void JsonLines::write(const json& j) { out_ << j.dump() << '\n' << std::flush; }

void log(const std::string& message) { std::cerr << "[gesturelm] " << message << std::endl; }

}  // namespace gesturelm::cli
