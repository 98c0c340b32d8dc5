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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gesturelm/alignment/transcript.hpp"
#include "gesturelm/data/corpus.hpp"
#include "gesturelm/motion/motion.hpp"

namespace gesturelm::data {

struct SynthConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> tasks = {"discourse", "quantifier", "stance"};
  int train = 2000;  // utterances per task and split
  int val = 200;
  int test = 400;
  int speakers = 4;
  double p_cue = 1.0;
  double noise = 0.02;             // std of per-frame joint rotation noise, rad
  double fps = motion::kDefaultFps;
  int frames_per_word = 4;         // filler words
  int motif_frames = 8;            // marker span (split evenly over its words)
  double motif_amplitude = 1.0;    // rad
  double min_motif_distance = 0.5; // RMS rotation-vector distance
  // task -> marker -> relative weight (absent markers weigh 1)
  std::map<std::string, std::map<std::string, double>> marker_weights;
  // task -> templates containing one "{}" slot (absent tasks use built-ins)
  std::map<std::string, std::vector<std::string>> templates;

  void validate() const;
};
void to_json(nlohmann::json& j, const SynthConfig& c);
void read_config(const nlohmann::json& j, SynthConfig& c);

const std::vector<std::string>& default_templates(const std::string& task);

// Rotation-vector offsets over the idle pose: [frames][joint] for the
// motif joints (l_elbow, l_wrist, r_elbow, r_wrist).
struct Motif {
  std::vector<std::vector<motion::Vec3>> offsets;
};
inline constexpr int kMotifJoints = 4;
const std::vector<std::string>& motif_joint_names();

double motif_distance(const Motif& a, const Motif& b);

// marker -> motif for every marker of cfg.tasks' default label sets. The
// i-th marker of each task gets the i-th motif pattern, so patterns are
// pairwise distinct within a task. Throws DataError when patterns cannot
// be separated by min_motif_distance.
std::map<std::string, Motif> motif_table(const SynthConfig& cfg);

struct SynthUtterance {
  ManifestEntry entry;
  std::string marker;
  bool cue = false;
  int motif_begin = 0;  // frame where the marker span starts
  alignment::TimedTranscript transcript;
  motion::MotionSequence motion;
};

// Utterance `index` of `task`. Text, cue and motion draws use separate
// streams keyed by (seed, utterance id), so corpora that differ only in
// p_cue share their text exactly. Throws DataError when the motif table
// lacks the drawn marker.
SynthUtterance synthesize(const SynthConfig& cfg, const std::string& task, int index,
                          const std::map<std::string, Motif>& motifs);

// Writes motion/<id>.gmot, transcripts/<id>.json, manifest.jsonl and
// synth_config.json under out. Returns the manifest.
Manifest generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out);

// Marker whose motif is nearest (RMS over the motif joints, relative to the
// idle pose) to the motion starting at `begin`; ties to the earlier marker.
std::string nearest_motif(const motion::MotionSequence& m, int begin, const std::vector<std::string>& markers,
                          const std::map<std::string, Motif>& motifs);

}  // namespace gesturelm::data
