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

#include "gesturelm/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "gesturelm/config_reader.hpp"
#include "gesturelm/error.hpp"
#include "gesturelm/infill/task.hpp"
#include "gesturelm/lm/vocab.hpp"
#include "gesturelm/motion/skeleton.hpp"

namespace gesturelm::data {

namespace fs = std::filesystem;
using motion::Vec3;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::mt19937_64 stream(std::uint64_t seed, const std::string& key) {
  const std::uint64_t h = fnv1a(key);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kMotifSeed = 0x6d6f74696673ull;

struct JointIds {
  int spine2, l_shoulder, r_shoulder;
  int motif[kMotifJoints];
};

JointIds joint_ids() {
  static const motion::Skeleton sk = motion::Skeleton::upper_body();
  JointIds j{sk.find("spine2"), sk.find("l_shoulder"), sk.find("r_shoulder"), {}};
  for (int k = 0; k < kMotifJoints; ++k) j.motif[k] = sk.find(motif_joint_names()[k]);
  return j;
}

// Arms hanging, elbows slightly bent.
std::vector<Vec3> idle_pose(int joints) {
  static const JointIds ids = joint_ids();
  std::vector<Vec3> pose(joints, Vec3::Zero());
  pose[ids.l_shoulder] = Vec3(0, 0, -1.2);
  pose[ids.r_shoulder] = Vec3(0, 0, 1.2);
  pose[ids.motif[0]] = Vec3(0, -0.3, 0);
  pose[ids.motif[2]] = Vec3(0, 0.3, 0);
  return pose;
}

Vec3 rotvec_at(const motion::MotionSequence& m, int frame, int joint) {
  return motion::rotmat_to_rotvec(m.rotmat(frame, joint));
}

}  // namespace

const std::vector<std::string>& motif_joint_names() {
  static const std::vector<std::string> names = {"l_elbow", "l_wrist", "r_elbow", "r_wrist"};
  return names;
}

const std::vector<std::string>& default_templates(const std::string& task) {
  static const std::map<std::string, std::vector<std::string>> t = {
      {"discourse",
       {"i was tired {} i kept going", "we left early {} it rained", "she smiled {} he waved back",
        "the shop closed {} we went home", "you can stay {} you want", "he studied hard {} he passed",
        "they laughed {} the joke ended", "i cooked dinner {} she cleaned up", "it was cold {} we swam anyway",
        "the bus came {} we got on", "{} we talked for hours", "we waited there {}"}},
      {"quantifier",
       {"i saw {} birds in the park", "we need {} time for this", "she bought {} apples at noon",
        "{} people came to the party", "they ate {} cake after dinner", "he has {} friends in town",
        "there were {} cars outside today", "you read {} books this year", "we found {} shells there",
        "i drank {} water today"}},
      {"stance",
       {"that was {} good news", "i {} like this song", "she is {} coming tonight", "it {} looks fine to me",
        "we {} need more time", "this is {} hard work", "he {} knows the answer", "you {} want to see this",
        "the movie was {} long", "they {} left the room"}},
  };
  auto it = t.find(task);
  if (it == t.end()) throw UsageError("no templates for task '" + task + "'");
  return it->second;
}

void SynthConfig::validate() const {
  if (tasks.empty()) throw UsageError("synth: at least one task");
  for (const auto& task : tasks) infill::LabelSet::defaults(task);
  if (train < 0 || val < 0 || test < 0 || train + val + test == 0) throw UsageError("synth: utterance counts");
  if (speakers < 1) throw UsageError("synth: speakers must be >= 1");
  if (!(p_cue >= 0 && p_cue <= 1)) throw UsageError("synth: p_cue must be in [0, 1]");
  if (!(noise >= 0) || !(fps > 0) || frames_per_word < 1 || motif_frames < 2) {
    throw UsageError("synth: noise >= 0, fps > 0, frames_per_word >= 1, motif_frames >= 2");
  }
  if (!(motif_amplitude > 0) || !(min_motif_distance >= 0)) throw UsageError("synth: motif amplitude/distance");
  for (const auto& [task, weights] : marker_weights) {
    const auto labels = infill::LabelSet::defaults(task);
    double total = 0;
    for (const auto& [marker, w] : weights) {
      if (labels.index_of(marker) < 0) throw UsageError("synth: '" + marker + "' is not a " + task + " marker");
      if (!(w >= 0)) throw UsageError("synth: marker weights must be >= 0");
    }
    for (const auto& m : labels.markers) total += weights.count(m) ? weights.at(m) : 1.0;
    if (!(total > 0)) throw UsageError("synth: all marker weights of " + task + " are zero");
  }
  for (const auto& [task, list] : templates) {
    if (list.empty()) throw UsageError("synth: empty template list for " + task);
    for (const auto& tpl : list) {
      const auto at = tpl.find("{}");
      if (at == std::string::npos || tpl.find("{}", at + 2) != std::string::npos) {
        throw UsageError("synth: template needs exactly one {} slot: '" + tpl + "'");
      }
    }
  }
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = {{"seed", c.seed},
       {"tasks", c.tasks},
       {"train", c.train},
       {"val", c.val},
       {"test", c.test},
       {"speakers", c.speakers},
       {"p_cue", c.p_cue},
       {"noise", c.noise},
       {"fps", c.fps},
       {"frames_per_word", c.frames_per_word},
       {"motif_frames", c.motif_frames},
       {"motif_amplitude", c.motif_amplitude},
       {"min_motif_distance", c.min_motif_distance},
       {"marker_weights", c.marker_weights},
       {"templates", c.templates}};
}

void read_config(const nlohmann::json& j, SynthConfig& c) {
  ConfigReader r(j, "synth");
  r.get("seed", c.seed);
  r.get("tasks", c.tasks);
  r.get("train", c.train);
  r.get("val", c.val);
  r.get("test", c.test);
  r.get("speakers", c.speakers);
  r.get("p_cue", c.p_cue);
  r.get("noise", c.noise);
  r.get("fps", c.fps);
  r.get("frames_per_word", c.frames_per_word);
  r.get("motif_frames", c.motif_frames);
  r.get("motif_amplitude", c.motif_amplitude);
  r.get("min_motif_distance", c.min_motif_distance);
  r.get("marker_weights", c.marker_weights);
  r.get("templates", c.templates);
  r.finish();
}

double motif_distance(const Motif& a, const Motif& b) {
  if (a.offsets.size() != b.offsets.size()) throw UsageError("motifs differ in length");
  double ss = 0;
  long n = 0;
  for (std::size_t t = 0; t < a.offsets.size(); ++t) {
    for (int k = 0; k < kMotifJoints; ++k) {
      ss += (a.offsets[t][k] - b.offsets[t][k]).squaredNorm();
      ++n;
    }
  }
  return std::sqrt(ss / static_cast<double>(std::max(1L, n)));
}

std::map<std::string, Motif> motif_table(const SynthConfig& cfg) {
  std::size_t patterns = 0;
  for (const auto& task : cfg.tasks) patterns = std::max(patterns, infill::LabelSet::defaults(task).size());

  std::mt19937_64 rng(kMotifSeed);
  std::uniform_real_distribution<double> u(-cfg.motif_amplitude, cfg.motif_amplitude);
  Motif idle;
  idle.offsets.assign(cfg.motif_frames, std::vector<Vec3>(kMotifJoints, Vec3::Zero()));
  std::vector<Motif> chosen;
  for (int attempt = 0; chosen.size() < patterns; ++attempt) {
    if (attempt > 10000) throw DataError("cannot place motifs at distance " + std::to_string(cfg.min_motif_distance));
    Vec3 from[kMotifJoints], to[kMotifJoints];
    for (int k = 0; k < kMotifJoints; ++k) {
      from[k] = Vec3(u(rng), u(rng), u(rng));
      to[k] = Vec3(u(rng), u(rng), u(rng));
    }
    Motif m;
    for (int t = 0; t < cfg.motif_frames; ++t) {
      const double s = static_cast<double>(t) / (cfg.motif_frames - 1);
      std::vector<Vec3> row(kMotifJoints);
      for (int k = 0; k < kMotifJoints; ++k) row[k] = (1 - s) * from[k] + s * to[k];
      m.offsets.push_back(std::move(row));
    }
    bool ok = motif_distance(m, idle) >= cfg.min_motif_distance;
    for (const auto& c : chosen) ok = ok && motif_distance(m, c) >= cfg.min_motif_distance;
    if (ok) chosen.push_back(std::move(m));
  }
  std::map<std::string, Motif> table;
  for (const auto& task : cfg.tasks) {
    const auto labels = infill::LabelSet::defaults(task);
    for (std::size_t i = 0; i < labels.size(); ++i) table.emplace(labels.markers[i], chosen[i]);
  }
  return table;
}

SynthUtterance synthesize(const SynthConfig& cfg, const std::string& task, int index,
                          const std::map<std::string, Motif>& motifs) {
  const auto labels = infill::LabelSet::defaults(task);
  const auto& tpls = cfg.templates.count(task) ? cfg.templates.at(task) : default_templates(task);

  SynthUtterance u;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  u.entry.id = task + "_" + buf;
  u.entry.task = task;
  u.entry.speaker = "spk" + std::to_string(index % cfg.speakers);
  u.entry.split = index < cfg.train ? Split::train : index < cfg.train + cfg.val ? Split::val : Split::test;
  u.entry.motion = fs::path("motion") / (u.entry.id + ".gmot");
  u.entry.transcript = fs::path("transcripts") / (u.entry.id + ".json");

  // Text: template and marker drawn independently.
  auto text_rng = stream(cfg.seed, u.entry.id + "/text");
  std::vector<double> weights;
  for (const auto& m : labels.markers) {
    auto it = cfg.marker_weights.find(task);
    weights.push_back(it != cfg.marker_weights.end() && it->second.count(m) ? it->second.at(m) : 1.0);
  }
  const std::string& tpl = tpls[std::uniform_int_distribution<std::size_t>(0, tpls.size() - 1)(text_rng)];
  u.marker = labels.markers[std::discrete_distribution<int>(weights.begin(), weights.end())(text_rng)];
  const auto motif = motifs.find(u.marker);
  if (motif == motifs.end()) throw DataError("motif table has no entry for '" + u.marker + "'");
  if (static_cast<int>(motif->second.offsets.size()) != cfg.motif_frames) {
    throw DataError("motif for '" + u.marker + "' has the wrong length");
  }

  const auto slot = tpl.find("{}");
  const auto before = lm::split_words(tpl.substr(0, slot));
  const auto after = lm::split_words(tpl.substr(slot + 2));
  const auto marker_words = lm::split_words(u.marker);
  if (cfg.motif_frames % static_cast<int>(marker_words.size()) != 0) {
    throw UsageError("synth: motif_frames must divide evenly over '" + u.marker + "'");
  }
  u.transcript.id = u.entry.id;
  int frame = 0;
  auto add_word = [&](const std::string& w, int frames) {
    u.transcript.words.push_back({w, frame / cfg.fps, (frame + frames) / cfg.fps});
    frame += frames;
  };
  for (const auto& w : before) add_word(w, cfg.frames_per_word);
  u.motif_begin = frame;
  for (const auto& w : marker_words) add_word(w, cfg.motif_frames / static_cast<int>(marker_words.size()));
  for (const auto& w : after) add_word(w, cfg.frames_per_word);
  const auto found = infill::find_markers(u.transcript, labels);
  if (found.size() != 1 || labels.markers[found[0].label] != u.marker) {
    throw UsageError("synth: template '" + tpl + "' contains another " + task + " marker");
  }

  auto cue_rng = stream(cfg.seed, u.entry.id + "/cue");
  u.cue = std::uniform_real_distribution<double>(0, 1)(cue_rng) < cfg.p_cue;

  // Motion: idle pose, speaker posture, sway, optional motif, noise.
  auto motion_rng = stream(cfg.seed, u.entry.id + "/motion");
  static const JointIds ids = joint_ids();
  const int J = motion::kDefaultJoints;
  const auto idle = idle_pose(J);
  const double posture = 0.1 * ((index % cfg.speakers) - 0.5 * (cfg.speakers - 1)) / std::max(1, cfg.speakers);
  std::uniform_real_distribution<double> phase(0, 2 * std::numbers::pi), freq(0.2, 0.5);
  const double ph = phase(motion_rng), f = freq(motion_rng);
  std::normal_distribution<double> noise(0, 1);
  u.motion = motion::MotionSequence(frame, J, cfg.fps);
  for (int t = 0; t < frame; ++t) {
    std::vector<Vec3> pose = idle;
    pose[ids.l_shoulder].z() -= posture;
    pose[ids.r_shoulder].z() += posture;
    pose[ids.spine2].y() += 0.05 * std::sin(2 * std::numbers::pi * f * t / cfg.fps + ph);
    if (u.cue && t >= u.motif_begin && t < u.motif_begin + cfg.motif_frames) {
      for (int k = 0; k < kMotifJoints; ++k) pose[ids.motif[k]] += motif->second.offsets[t - u.motif_begin][k];
    }
    for (int j = 0; j < J; ++j) {
      Vec3 r = pose[j];
      if (cfg.noise > 0) r += cfg.noise * Vec3(noise(motion_rng), noise(motion_rng), noise(motion_rng));
      u.motion.set_rotation(t, j, motion::rotvec_to_rotmat(r));
    }
  }
  return u;
}

Manifest generate_synthetic(const SynthConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto motifs = motif_table(cfg);
  std::error_code ec;
  fs::create_directories(out / "motion", ec);
  fs::create_directories(out / "transcripts", ec);
  if (ec) throw DataError("cannot create " + out.string() + ": " + ec.message());
  Manifest manifest;
  manifest.root = out;
  for (const auto& task : cfg.tasks) {
    for (int i = 0; i < cfg.train + cfg.val + cfg.test; ++i) {
      auto u = synthesize(cfg, task, i, motifs);
      motion::write_motion(out / u.entry.motion, u.motion);
      write_transcript(out / u.entry.transcript, u.transcript);
      manifest.entries.push_back(std::move(u.entry));
    }
  }
  write_manifest(out / "manifest.jsonl", manifest);
  std::ofstream(out / "synth_config.json") << nlohmann::json(cfg).dump(2) << '\n';
  return manifest;
}

std::string nearest_motif(const motion::MotionSequence& m, int begin, const std::vector<std::string>& markers,
                          const std::map<std::string, Motif>& motifs) {
  if (markers.empty()) throw UsageError("no candidate markers");
  static const JointIds ids = joint_ids();
  const auto idle = idle_pose(m.joints());
  std::string best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& marker : markers) {
    auto it = motifs.find(marker);
    if (it == motifs.end()) throw DataError("motif table has no entry for '" + marker + "'");
    const auto& off = it->second.offsets;
    if (begin < 0 || begin + static_cast<int>(off.size()) > m.frames()) throw UsageError("motif window out of range");
    double ss = 0;
    for (std::size_t t = 0; t < off.size(); ++t) {
      for (int k = 0; k < kMotifJoints; ++k) {
        const int j = ids.motif[k];
        ss += (rotvec_at(m, begin + static_cast<int>(t), j) - idle[j] - off[t][k]).squaredNorm();
      }
    }
    if (ss < best_d) {
      best_d = ss;
      best = marker;
    }
  }
  return best;
}

}  // namespace gesturelm::data
