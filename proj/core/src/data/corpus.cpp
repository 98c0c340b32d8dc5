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

#include "gesturelm/data/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "gesturelm/error.hpp"

namespace gesturelm::data {

namespace fs = std::filesystem;

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

void to_json(nlohmann::json& j, const ManifestEntry& e) {
  j = {{"id", e.id},
       {"motion", e.motion.generic_string()},
       {"transcript", e.transcript.generic_string()},
       {"speaker", e.speaker},
       {"split", to_string(e.split)}};
  if (!e.task.empty()) j["task"] = e.task;
}

void from_json(const nlohmann::json& j, ManifestEntry& e) {
  e.id = j.at("id").get<std::string>();
  e.motion = j.at("motion").get<std::string>();
  e.transcript = j.at("transcript").get<std::string>();
  e.speaker = j.value("speaker", std::string());
  e.split = parse_split(j.value("split", std::string("train")));
  e.task = j.value("task", std::string());
}

fs::path Manifest::motion_path(const ManifestEntry& e) const {
  return e.motion.is_absolute() ? e.motion : root / e.motion;
}

fs::path Manifest::transcript_path(const ManifestEntry& e) const {
  return e.transcript.is_absolute() ? e.transcript : root / e.transcript;
}

std::vector<const ManifestEntry*> Manifest::select(Split split, const std::string& task) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == split && (task.empty() || e.task == task)) out.push_back(&e);
  }
  return out;
}

void Manifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.id.empty()) throw DataError("manifest entry with an empty id");
    if (!ids.insert(e.id).second) throw DataError("duplicate utterance id '" + e.id + "' in manifest");
  }
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.entries.push_back(nlohmann::json::parse(line).get<ManifestEntry>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  m.validate();
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  manifest.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& e : manifest.entries) out << nlohmann::json(e).dump() << '\n';
}

alignment::TimedTranscript read_transcript(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open transcript " + path.string());
  alignment::TimedTranscript t;
  try {
    t = nlohmann::json::parse(in).get<alignment::TimedTranscript>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  t.validate();
  return t;
}

void write_transcript(const fs::path& path, const alignment::TimedTranscript& t) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write transcript " + path.string());
  out << nlohmann::json(t).dump() << '\n';
}

void to_json(nlohmann::json& j, const LoadReport& r) {
  j = {{"loaded", r.loaded}, {"skipped", r.skipped}, {"reasons", nlohmann::json::array()}};
  for (const auto& s : r.reasons) j["reasons"].push_back({{"id", s.id}, {"reason", s.reason}});
}

LoadReport stream_corpus(const Manifest& manifest, const std::vector<const ManifestEntry*>& entries,
                         const LoadOptions& options, const std::function<void(CorpusItem&&)>& fn) {
  LoadReport report;
  double fps = options.fps;
  for (const auto* e : entries) {
    CorpusItem item;
    item.entry = e;
    try {
      item.transcript = read_transcript(manifest.transcript_path(*e));
      if (item.transcript.id.empty()) item.transcript.id = e->id;
      if (item.transcript.id != e->id) {
        throw DataError("transcript id '" + item.transcript.id + "' does not match the manifest");
      }
      if (options.read_motion) {
        item.motion = motion::read_motion(manifest.motion_path(*e));
        if (fps == 0) fps = item.motion.fps();
        if (item.motion.fps() != fps) {
          throw DataError("fps " + std::to_string(item.motion.fps()) + " differs from " + std::to_string(fps));
        }
        if (options.joints != 0 && item.motion.joints() != options.joints) {
          throw DataError("expected " + std::to_string(options.joints) + " joints, got " +
                          std::to_string(item.motion.joints()));
        }
        item.motion.validate();
        const double gap = std::abs(item.transcript.end_time() - item.motion.duration());
        if (!item.transcript.words.empty() && gap > options.tolerance_frames / fps + 1e-9) {
          throw DataError("transcript ends " + std::to_string(item.transcript.end_time()) + " s but motion lasts " +
                          std::to_string(item.motion.duration()) + " s");
        }
      }
    } catch (const Error& err) {
      ++report.skipped;
      report.reasons.push_back({e->id, err.what()});
      continue;
    }
    ++report.loaded;
    fn(std::move(item));
  }
  return report;
}

LoadReport stream_corpus(const Manifest& manifest, const LoadOptions& options,
                         const std::function<void(CorpusItem&&)>& fn) {
  std::vector<const ManifestEntry*> all;
  for (const auto& e : manifest.entries) all.push_back(&e);
  return stream_corpus(manifest, all, options, fn);
}

std::vector<CorpusItem> load_corpus(const Manifest& manifest, const std::vector<const ManifestEntry*>& entries,
                                    const LoadOptions& options, LoadReport* report) {
  std::vector<CorpusItem> items;
  auto r = stream_corpus(manifest, entries, options, [&](CorpusItem&& item) { items.push_back(std::move(item)); });
  if (report != nullptr) *report = std::move(r);
  return items;
}

Manifest split_corpus(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed) {
  manifest.validate();
  const std::array<double, 3> r = {ratios.train, ratios.val, ratios.test};
  for (double x : r) {
    if (x < 0 || !std::isfinite(x)) throw UsageError("split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
  const auto n = static_cast<long>(manifest.entries.size());
  const long n_val = std::lround(static_cast<double>(n) * r[1]);
  const long n_test = std::lround(static_cast<double>(n) * r[2]);
  const long n_train = n - n_val - n_test;
  if ((r[0] > 0 && n_train < 1) || (r[1] > 0 && n_val < 1) || (r[2] > 0 && n_test < 1) || n_train < 0) {
    throw DataError("too few utterances (" + std::to_string(n) + ") for a nonempty split");
  }

  std::mt19937_64 rng(seed);
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) by_speaker[manifest.entries[i].speaker].push_back(i);
  struct Ranked {
    double quantile;
    std::uint64_t tie;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  for (auto& [speaker, idx] : by_speaker) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      ranked.push_back({(static_cast<double>(j) + 0.5) / static_cast<double>(idx.size()), rng(), idx[j]});
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return a.quantile != b.quantile ? a.quantile < b.quantile : a.tie < b.tie;
  });
  Manifest out = manifest;
  for (long k = 0; k < n; ++k) {
    out.entries[ranked[k].index].split = k < n_train ? Split::train : k < n_train + n_val ? Split::val : Split::test;
  }
  return out;
}

}  // namespace gesturelm::data
