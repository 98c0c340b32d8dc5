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
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gesturelm/alignment/transcript.hpp"
#include "gesturelm/lm/vocab.hpp"
#include "gesturelm/tokenizer/vqvae.hpp"

namespace gesturelm::alignment {

using tokenizer::FrameSpan;

// Splits one (merged) word into LM sub-tokens.
using SubTokenSplitter = std::function<std::vector<std::string>(const std::string&)>;
std::vector<std::string> identity_split(const std::string& word);

struct TimedToken {
  std::string text;
  double start = 0;
  double end = 0;
  int first_word = 0;  // transcript word indices covered
  int last_word = 0;
};

// Words lowercased and merged into multi-word vocabulary entries (timing
// from the first word's start to the last word's end), then split by
// `splitter` with the interval divided in proportion to character counts.
std::vector<TimedToken> timed_tokens(const TimedTranscript& transcript, const lm::Vocab& vocab,
                                     const SubTokenSplitter& splitter = identity_split);

// Index into `tokens` for every gesture span: the token whose [start, end)
// contains the span's midpoint time. Midpoints are clamped to the transcript
// range; a midpoint in a gap goes to the nearer token, ties to the earlier.
std::vector<int> assign_positions(const std::vector<TimedToken>& tokens, std::span<const FrameSpan> spans, double fps);
std::vector<int> assign_positions(const TimedTranscript& transcript, std::span<const FrameSpan> spans, double fps,
                                  const lm::Vocab& vocab, const SubTokenSplitter& splitter = identity_split);

enum class PositionScheme {
  shared,      // gesture tokens reuse the position of their text token
  sequential,  // gesture block continues numbering after </s>
};
PositionScheme parse_position_scheme(const std::string& s);
std::string to_string(PositionScheme s);

enum class Modality : std::uint8_t { text, gesture };

// <s> t... </s> [BOG] g... [EOG]. Text positions are 0..n-1 with <s> at 0.
// An empty gesture block (no BOG/EOG) marks a text-only example.
struct PairedExample {
  std::string id;
  std::vector<int> text_ids;
  std::vector<int> text_positions;
  std::vector<int> gesture_ids;
  std::vector<int> gesture_positions;
  int gesture_vocab = 0;        // K; BOG = K, EOG = K + 1, GMASK = K + 2
  std::vector<int> text_gold;   // original id where masked, else -1
  std::vector<int> gesture_gold;
  // Transcript word span of each text slot ({-1,-1} for <s>, </s>).
  std::vector<std::pair<int, int>> text_words;

  bool has_gestures() const { return !gesture_ids.empty(); }
  std::size_t slots() const { return text_ids.size() + gesture_ids.size(); }
  std::vector<Modality> modalities() const;
};

struct PairOptions {
  PositionScheme positions = PositionScheme::shared;
  SubTokenSplitter splitter = identity_split;
};

PairedExample text_example(const TimedTranscript& transcript, const lm::Vocab& vocab,
                           const SubTokenSplitter& splitter = identity_split);

// gestures: BOG g... EOG with spans for the interior (or empty / BOG EOG
// only, giving a [BOG, EOG] block). BOG/EOG take the positions of <s>/</s>.
PairedExample build_pair(const TimedTranscript& transcript, const tokenizer::GestureTokenSeq& gestures, double fps,
                         const lm::Vocab& vocab, int gesture_vocab, const PairOptions& options = {});

// Independent Bernoulli masking: non-special text ids -> <mask> with
// probability p_text, interior gesture ids -> GMASK with probability
// p_gesture. Gold ids are recorded; previous masks are kept.
PairedExample mask_tokens(const PairedExample& pair, double p_text, double p_gesture, std::mt19937_64& rng);

}  // namespace gesturelm::alignment
