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


#pragma once

#include <optional>

#include <CLI11.hpp>

#include "gesturelm/motion/skeleton.hpp"
#include "gesturelm/pipeline/experiment.hpp"
#include "run_config.hpp"

namespace gesturelm::cli {

void add_synth_command(CLI::App& app);
void add_tokenizer_commands(CLI::App& app);
void add_lm_commands(CLI::App& app);
void add_align_commands(CLI::App& app);
void add_finetune_command(CLI::App& app);
void add_eval_command(CLI::App& app);

// Shared input handling.
motion::Skeleton load_skeleton(const RunConfig& c);
data::Manifest load_manifest(const RunConfig& c);
// Corpus of the manifest (optionally one split only), with the load report
// written to <out>/load_report.json.
pipeline::Corpus load_inputs(const RunConfig& c, bool read_motion, int joints,
                             std::optional<data::Split> only = std::nullopt);
// "all" -> nullopt.
std::optional<data::Split> split_filter(const std::string& s);
std::string fixed(double v, int digits);

}  // namespace gesturelm::cli
