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

#include "gesturelm/infill/task.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "gesturelm/error.hpp"

namespace gesturelm::infill {

const std::vector<std::string>& LabelSet::task_names() {
  static const std::vector<std::string> names{"discourse", "quantifier", "stance"};
  return names;
}

LabelSet LabelSet::defaults(const std::string& task) {
  LabelSet l;
  l.task = task;
  if (task == "discourse") {
    l.markers = {"after", "also", "although", "and",     "as",   "because", "but",    "for example", "however",
                 "if",    "if then", "or",    "since",   "so",   "then",    "though", "when",        "while"};
  } else if (task == "quantifier") {
    l.markers = {"all",  "each", "enough", "entire", "few", "little", "less",  "many", "more",
                 "most", "much", "no",     "one",    "some", "three", "two",   "whole"};
  } else if (task == "stance") {
    l.markers = {"actually", "almost", "amazing", "especially", "extremely", "happy",  "important",
                 "may",      "maybe",  "might",   "must",       "probably",  "really", "very"};
  } else {
    throw UsageError("unknown task '" + task + "' (expected discourse, quantifier or stance)");
  }
  return l;
}

LabelSet LabelSet::load(const std::filesystem::path& path, const std::string& task) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file " + path.string());
  LabelSet l;
  l.task = task;
  std::string line;
  while (std::getline(in, line)) {
    const auto words = lm::split_words(line);
    if (words.empty()) continue;
    std::string m = words[0];
    for (std::size_t i = 1; i < words.size(); ++i) m += ' ' + words[i];
    l.markers.push_back(m);
  }
  l.validate();
  return l;
}

int LabelSet::index_of(const std::string& marker) const {
  auto it = std::find(markers.begin(), markers.end(), marker);
  return it == markers.end() ? -1 : static_cast<int>(it - markers.begin());
}

void LabelSet::validate() const {
  if (markers.empty()) throw UsageError("label set '" + task + "' is empty");
  std::set<std::string> seen;
  for (const auto& m : markers) {
    if (m.empty() || m != lm::lowercase(m)) throw UsageError("label '" + m + "' must be non-empty lowercase");
    if (!seen.insert(m).second) throw UsageError("duplicate label '" + m + "' in task " + task);
  }
}

void LabelSet::bind(const lm::Vocab& vocab) {
  validate();
  ids.clear();
  for (const auto& m : markers) {
    if (!vocab.contains(m)) throw UsageError("label '" + m + "' of task " + task + " is not a vocabulary entry");
    ids.push_back(vocab.id(m));
  }
}

std::vector<Occurrence> find_markers(const std::vector<std::string>& raw_words, const LabelSet& labels) {
  std::vector<std::string> words;
  for (const auto& w : raw_words) words.push_back(lm::lowercase(w));
  struct Match {
    int first, last, label;
  };
  std::vector<Match> all;
  for (std::size_t l = 0; l < labels.markers.size(); ++l) {
    const auto parts = lm::split_words(labels.markers[l]);
    if (parts.empty() || parts.size() > words.size()) continue;
    for (std::size_t s = 0; s + parts.size() <= words.size(); ++s) {
      if (std::equal(parts.begin(), parts.end(), words.begin() + static_cast<long>(s))) {
        all.push_back({static_cast<int>(s), static_cast<int>(s + parts.size() - 1), static_cast<int>(l)});
      }
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Match& a, const Match& b) {
    const int la = a.last - a.first, lb = b.last - b.first;
    return la != lb ? la > lb : a.first < b.first;
  });
  std::vector<char> used(words.size(), 0);
  std::vector<Occurrence> out;
  for (const auto& m : all) {
    bool free = true;
    for (int i = m.first; i <= m.last; ++i) free = free && !used[i];
    if (!free) continue;
    for (int i = m.first; i <= m.last; ++i) used[i] = 1;
    out.push_back({m.first, m.last, m.label});
  }
  std::sort(out.begin(), out.end(), [](const Occurrence& a, const Occurrence& b) { return a.first_word < b.first_word; });
  return out;
}

std::vector<Occurrence> find_markers(const alignment::TimedTranscript& transcript, const LabelSet& labels) {
  std::vector<std::string> words;
  for (const auto& w : transcript.words) words.push_back(w.text);
  return find_markers(words, labels);
}

std::vector<long> count_markers(const std::vector<alignment::TimedTranscript>& transcripts, const LabelSet& labels) {
  std::vector<long> counts(labels.size(), 0);
  for (const auto& t : transcripts) {
    for (const auto& o : find_markers(t, labels)) ++counts[o.label];
  }
  return counts;
}

LabelSet frequency_filter(const LabelSet& labels, const std::vector<long>& counts, long threshold) {
  if (counts.size() != labels.size()) throw UsageError("frequency_filter: one count per label required");
  LabelSet out;
  out.task = labels.task;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (counts[i] > threshold) {
      out.markers.push_back(labels.markers[i]);
      if (!labels.ids.empty()) out.ids.push_back(labels.ids[i]);
    }
  }
  if (out.markers.empty()) {
    throw DataError("no marker of task " + labels.task + " occurs more than " + std::to_string(threshold) + " times");
  }
  return out;
}

InfillExample build_infill_example(const alignment::PairedExample& pair, const Occurrence& occurrence,
                                   const LabelSet& labels) {
  if (occurrence.label < 0 || occurrence.label >= static_cast<int>(labels.size())) {
    throw UsageError("occurrence label out of range");
  }
  int a = -1, b = -1;
  for (std::size_t i = 0; i < pair.text_words.size(); ++i) {
    const auto [fw, lw] = pair.text_words[i];
    if (fw < 0) continue;
    if (lw >= occurrence.first_word && fw <= occurrence.last_word) {
      if (a < 0) a = static_cast<int>(i);
      b = static_cast<int>(i);
    }
  }
  if (a < 0 || pair.text_words[a].first != occurrence.first_word || pair.text_words[b].second != occurrence.last_word) {
    throw UsageError("occurrence in '" + pair.id + "' is out of range or splits a text token");
  }
  const int removed = b - a;
  InfillExample ex;
  ex.id = pair.id;
  ex.gold = occurrence.label;
  ex.mask_slot = a;
  alignment::PairedExample& in = ex.input;
  in = pair;
  in.text_ids.erase(in.text_ids.begin() + a + 1, in.text_ids.begin() + b + 1);
  in.text_gold.erase(in.text_gold.begin() + a + 1, in.text_gold.begin() + b + 1);
  in.text_words.erase(in.text_words.begin() + a + 1, in.text_words.begin() + b + 1);
  in.text_words[a] = {occurrence.first_word, occurrence.last_word};
  in.text_ids[a] = 2;  // <mask>
  in.text_positions.resize(in.text_ids.size());
  for (std::size_t i = 0; i < in.text_positions.size(); ++i) in.text_positions[i] = static_cast<int>(i);
  for (int& p : in.gesture_positions) {
    if (p > b) {
      p -= removed;
    } else if (p > a) {
      p = a;
    }
  }
  return ex;
}

InfillExample build_infill_example(const alignment::TimedTranscript& transcript, const Occurrence& occurrence,
                                   const LabelSet& labels, const lm::Vocab& vocab) {
  return build_infill_example(alignment::text_example(transcript, vocab), occurrence, labels);
}

InfillExample restrict_gesture_window(const InfillExample& example, int window) {
  if (window < 0) throw UsageError("gesture window must be >= 0");
  if (window == 0 || !example.input.has_gestures()) return example;
  InfillExample out = example;
  auto& in = out.input;
  const int K = in.gesture_vocab;
  in.gesture_ids.clear();
  in.gesture_positions.clear();
  in.gesture_gold.clear();
  const auto& src = example.input;
  const int center = src.text_positions[example.mask_slot];
  for (std::size_t i = 0; i < src.gesture_ids.size(); ++i) {
    const int id = src.gesture_ids[i];
    const bool special = id == tokenizer::bog_id(K) || id == tokenizer::eog_id(K);
    if (special || std::abs(src.gesture_positions[i] - center) <= window) {
      in.gesture_ids.push_back(id);
      in.gesture_positions.push_back(src.gesture_positions[i]);
      in.gesture_gold.push_back(src.gesture_gold[i]);
    }
  }
  return out;
}

InfillExample text_only(const InfillExample& example) {
  InfillExample out = example;
  out.input.gesture_ids.clear();
  out.input.gesture_positions.clear();
  out.input.gesture_gold.clear();
  return out;
}

}  // namespace gesturelm::infill
