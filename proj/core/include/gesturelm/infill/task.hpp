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

#include "gesturelm/alignment/pairing.hpp"
#include "gesturelm/alignment/transcript.hpp"
#include "gesturelm/lm/vocab.hpp"

namespace gesturelm::infill {

struct LabelSet {
  std::string task;
  std::vector<std::string> markers;
  std::vector<int> ids;  // vocabulary ids, filled by bind()

  static const std::vector<std::string>& task_names();
  // discourse, quantifier or stance; throws UsageError otherwise.
  static LabelSet defaults(const std::string& task);
  // One marker per line.
  static LabelSet load(const std::filesystem::path& path, const std::string& task);

  std::size_t size() const { return markers.size(); }
  // -1 when absent.
  int index_of(const std::string& marker) const;
  // Resolves every marker to a single vocabulary entry; UsageError otherwise.
  void bind(const lm::Vocab& vocab);
  void validate() const;
};

struct Occurrence {
  int first_word = 0;  // inclusive transcript word indices
  int last_word = 0;
  int label = 0;       // index into LabelSet::markers
};

// Case-insensitive exact matches of label markers on word spans. Overlaps
// are resolved longest-first, then leftmost. Result sorted by position.
std::vector<Occurrence> find_markers(const std::vector<std::string>& words, const LabelSet& labels);
std::vector<Occurrence> find_markers(const alignment::TimedTranscript& transcript, const LabelSet& labels);

// Occurrence counts per label over the transcripts.
std::vector<long> count_markers(const std::vector<alignment::TimedTranscript>& transcripts, const LabelSet& labels);

// Keeps markers with count > threshold (counts in label order). Throws
// DataError when nothing survives.
LabelSet frequency_filter(const LabelSet& labels, const std::vector<long>& counts, long threshold = 30);

// <s> t1 <mask> t2 </s> plus the pair's gesture block (if any).
struct InfillExample {
  std::string id;
  alignment::PairedExample input;
  int mask_slot = 0;  // index into input.text_ids
  int gold = 0;       // label index
};

// Replaces the text slots covering the occurrence's words with one <mask>.
// Later text positions shift down so positions stay 0..n-1; gesture
// positions follow their text slot. Throws UsageError when the occurrence
// does not align with whole text slots.
InfillExample build_infill_example(const alignment::PairedExample& pair, const Occurrence& occurrence,
                                   const LabelSet& labels);
InfillExample build_infill_example(const alignment::TimedTranscript& transcript, const Occurrence& occurrence,
                                   const LabelSet& labels, const lm::Vocab& vocab);

// Keeps only interior gesture tokens within `window` positions of the mask
// (window 0 keeps everything).
InfillExample restrict_gesture_window(const InfillExample& example, int window);

// Drops the gesture block.
InfillExample text_only(const InfillExample& example);

}  // namespace gesturelm::infill
