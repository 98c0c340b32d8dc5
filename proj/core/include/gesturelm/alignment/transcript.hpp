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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gesturelm::alignment {

struct TimedWord {
  std::string text;
  double start = 0;  // seconds
  double end = 0;
};

struct TimedTranscript {
  std::string id;
  std::vector<TimedWord> words;

  // 0 <= start < end, time-ordered, non-overlapping; throws DataError.
  void validate() const;
  double begin_time() const { return words.empty() ? 0.0 : words.front().start; }
  double end_time() const { return words.empty() ? 0.0 : words.back().end; }
  std::string text() const;
};

void to_json(nlohmann::json& j, const TimedTranscript& t);
void from_json(const nlohmann::json& j, TimedTranscript& t);

// JSON-lines, one {"id", "words": [{"text","start","end"}]} per line.
std::vector<TimedTranscript> read_transcripts(const std::filesystem::path& path);
void write_transcripts(const std::filesystem::path& path, const std::vector<TimedTranscript>& transcripts);

}  // namespace gesturelm::alignment
