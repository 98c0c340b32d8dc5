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

#include "gesturelm/alignment/transcript.hpp"

#include <cmath>
#include <fstream>

#include "gesturelm/error.hpp"

namespace gesturelm::alignment {

void TimedTranscript::validate() const {
  double previous_end = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    const std::string where = "transcript '" + id + "' word " + std::to_string(i);
    if (w.text.empty()) throw DataError(where + " is empty");
    if (!std::isfinite(w.start) || !std::isfinite(w.end) || w.start < 0 || !(w.start < w.end)) {
      throw DataError(where + " needs 0 <= start < end");
    }
    if (i > 0 && w.start < previous_end) throw DataError(where + " overlaps or precedes the previous word");
    previous_end = w.end;
  }
}

std::string TimedTranscript::text() const {
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w.text;
  }
  return s;
}

void to_json(nlohmann::json& j, const TimedTranscript& t) {
  nlohmann::json words = nlohmann::json::array();
  for (const auto& w : t.words) words.push_back({{"text", w.text}, {"start", w.start}, {"end", w.end}});
  j = {{"id", t.id}, {"words", std::move(words)}};
}

void from_json(const nlohmann::json& j, TimedTranscript& t) {
  t.id = j.at("id").get<std::string>();
  t.words.clear();
  for (const auto& w : j.at("words")) {
    t.words.push_back({w.at("text").get<std::string>(), w.at("start").get<double>(), w.at("end").get<double>()});
  }
}

std::vector<TimedTranscript> read_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open transcript file " + path.string());
  std::vector<TimedTranscript> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<TimedTranscript>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.back().validate();
  }
  return out;
}

void write_transcripts(const std::filesystem::path& path, const std::vector<TimedTranscript>& transcripts) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write transcript file " + path.string());
  for (const auto& t : transcripts) out << nlohmann::json(t).dump() << '\n';
}

}  // namespace gesturelm::alignment
