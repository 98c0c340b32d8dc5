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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gesturelm/alignment/transcript.hpp"
#include "gesturelm/motion/motion.hpp"

namespace gesturelm::data {

enum class Split { train, val, test };
Split parse_split(const std::string& s);
std::string to_string(Split s);

struct ManifestEntry {
  std::string id;
  std::filesystem::path motion;      // relative paths resolve against the manifest directory
  std::filesystem::path transcript;  // JSON object or one-line JSONL
  std::string speaker;
  Split split = Split::train;
  std::string task;                  // optional (synthetic corpora)
};
void to_json(nlohmann::json& j, const ManifestEntry& e);
void from_json(const nlohmann::json& j, ManifestEntry& e);

struct Manifest {
  std::filesystem::path root;  // directory relative paths resolve against
  std::vector<ManifestEntry> entries;

  std::filesystem::path motion_path(const ManifestEntry& e) const;
  std::filesystem::path transcript_path(const ManifestEntry& e) const;
  std::vector<const ManifestEntry*> select(Split split, const std::string& task = "") const;
  // Throws DataError on duplicate or empty ids.
  void validate() const;
};

// JSON lines, one entry per line. Root is the file's directory.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

alignment::TimedTranscript read_transcript(const std::filesystem::path& path);
void write_transcript(const std::filesystem::path& path, const alignment::TimedTranscript& t);

struct LoadOptions {
  double fps = 0;            // 0: take the first loaded motion's rate
  int joints = 0;            // 0: any
  int tolerance_frames = 4;  // allowed |transcript end - motion duration|, in frames
  bool read_motion = true;   // false: transcripts only, motion files untouched
};

struct SkippedUtterance {
  std::string id;
  std::string reason;
};

struct LoadReport {
  long loaded = 0;
  long skipped = 0;
  std::vector<SkippedUtterance> reasons;
};
void to_json(nlohmann::json& j, const LoadReport& r);

struct CorpusItem {
  const ManifestEntry* entry = nullptr;
  motion::MotionSequence motion;  // empty when LoadOptions::read_motion is false
  alignment::TimedTranscript transcript;
};

// Streams entries in manifest order. Unreadable files, fps/joint mismatches
// and duration disagreement skip the utterance and are recorded in the
// report.
LoadReport stream_corpus(const Manifest& manifest, const std::vector<const ManifestEntry*>& entries,
                         const LoadOptions& options, const std::function<void(CorpusItem&&)>& fn);
LoadReport stream_corpus(const Manifest& manifest, const LoadOptions& options,
                         const std::function<void(CorpusItem&&)>& fn);
std::vector<CorpusItem> load_corpus(const Manifest& manifest, const std::vector<const ManifestEntry*>& entries,
                                    const LoadOptions& options, LoadReport* report = nullptr);

struct SplitRatios {
  double train = 0.8, val = 0.1, test = 0.1;
};

// Utterance-level split. Within each speaker the utterances are shuffled
// and ranked; globally the lowest within-speaker quantiles go to train,
// then val, then test, so every speaker with enough utterances lands in
// train. Split sizes are round(n * ratio) for val/test, the rest train.
Manifest split_corpus(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace gesturelm::data
