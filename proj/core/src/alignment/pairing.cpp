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

#include "gesturelm/alignment/pairing.hpp"

#include <algorithm>
#include <cmath>

#include "gesturelm/error.hpp"

namespace gesturelm::alignment {

std::vector<std::string> identity_split(const std::string& word) { return {word}; }

std::vector<TimedToken> timed_tokens(const TimedTranscript& transcript, const lm::Vocab& vocab,
                                     const SubTokenSplitter& splitter) {
  std::vector<std::string> words;
  words.reserve(transcript.words.size());
  for (const auto& w : transcript.words) words.push_back(lm::lowercase(w.text));
  std::vector<TimedToken> out;
  for (const auto& m : lm::merge_phrases(words, vocab)) {
    const double start = transcript.words[m.first_word].start;
    const double end = transcript.words[m.last_word].end;
    std::vector<std::string> parts = splitter ? splitter(m.text) : identity_split(m.text);
    if (parts.empty()) throw UsageError("sub-token splitter returned nothing for '" + m.text + "'");
    double chars = 0;
    for (const auto& p : parts) chars += static_cast<double>(p.size());
    double cursor = start;
    double used = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      used += static_cast<double>(parts[i].size());
      const double next = i + 1 == parts.size() ? end : start + (end - start) * used / chars;
      out.push_back({parts[i], cursor, next, m.first_word, m.last_word});
      cursor = next;
    }
  }
  return out;
}

std::vector<int> assign_positions(const std::vector<TimedToken>& tokens, std::span<const FrameSpan> spans, double fps) {
  if (tokens.empty()) throw DataError("cannot assign gesture positions against an empty transcript");
  if (!(fps > 0)) throw UsageError("fps must be positive");
  const double lo = tokens.front().start;
  const double hi = tokens.back().end;
  std::vector<int> out;
  out.reserve(spans.size());
  std::size_t k = 0;
  for (const auto& s : spans) {
    const double t = std::clamp(0.5 * (s.begin + s.end) / fps, lo, hi);
    if (t < tokens[k].start) k = 0;
    while (k + 1 < tokens.size() && t >= tokens[k + 1].start) ++k;
    int pick = static_cast<int>(k);
    if (t >= tokens[k].end && k + 1 < tokens.size()) {
      // in the gap after token k
      const double left = t - tokens[k].end;
      const double right = tokens[k + 1].start - t;
      if (right < left) pick = static_cast<int>(k + 1);
    }
    out.push_back(pick);
  }
  return out;
}

std::vector<int> assign_positions(const TimedTranscript& transcript, std::span<const FrameSpan> spans, double fps,
                                  const lm::Vocab& vocab, const SubTokenSplitter& splitter) {
  return assign_positions(timed_tokens(transcript, vocab, splitter), spans, fps);
}

PositionScheme parse_position_scheme(const std::string& s) {
  if (s == "shared") return PositionScheme::shared;
  if (s == "sequential") return PositionScheme::sequential;
  throw UsageError("unknown position scheme '" + s + "' (expected shared or sequential)");
}

std::string to_string(PositionScheme s) { return s == PositionScheme::shared ? "shared" : "sequential"; }

std::vector<Modality> PairedExample::modalities() const {
  std::vector<Modality> m(text_ids.size(), Modality::text);
  m.insert(m.end(), gesture_ids.size(), Modality::gesture);
  return m;
}

namespace {

PairedExample text_part(const TimedTranscript& transcript, const std::vector<TimedToken>& tokens,
                        const lm::Vocab& vocab) {
  PairedExample p;
  p.id = transcript.id;
  p.text_ids.push_back(vocab.bos());
  p.text_words.push_back({-1, -1});
  for (const auto& t : tokens) {
    p.text_ids.push_back(vocab.id(t.text));
    p.text_words.push_back({t.first_word, t.last_word});
  }
  p.text_ids.push_back(vocab.eos());
  p.text_words.push_back({-1, -1});
  for (std::size_t i = 0; i < p.text_ids.size(); ++i) p.text_positions.push_back(static_cast<int>(i));
  p.text_gold.assign(p.text_ids.size(), -1);
  return p;
}

}  // namespace

PairedExample text_example(const TimedTranscript& transcript, const lm::Vocab& vocab,
                           const SubTokenSplitter& splitter) {
  transcript.validate();
  return text_part(transcript, timed_tokens(transcript, vocab, splitter), vocab);
}

PairedExample build_pair(const TimedTranscript& transcript, const tokenizer::GestureTokenSeq& gestures, double fps,
                         const lm::Vocab& vocab, int gesture_vocab, const PairOptions& options) {
  transcript.validate();
  if (gesture_vocab < 1) throw UsageError("gesture vocabulary size must be positive");
  const auto tokens = timed_tokens(transcript, vocab, options.splitter);
  PairedExample p = text_part(transcript, tokens, vocab);
  p.gesture_vocab = gesture_vocab;
  const int K = gesture_vocab;

  std::vector<int> interior;
  if (!gestures.ids.empty()) {
    if (gestures.ids.size() < 2 || gestures.ids.front() != tokenizer::bog_id(K) ||
        gestures.ids.back() != tokenizer::eog_id(K)) {
      throw DataError("gesture stream of '" + transcript.id + "' is not wrapped in BOG/EOG");
    }
    const auto in = gestures.interior();
    interior.assign(in.begin(), in.end());
    if (interior.size() != gestures.spans.size()) throw DataError("gesture ids and spans differ in length");
    for (int id : interior) {
      if (id < 0 || id >= K) throw DataError("gesture id " + std::to_string(id) + " outside the codebook");
    }
  }

  const int eos_pos = static_cast<int>(p.text_ids.size()) - 1;
  p.gesture_ids.push_back(tokenizer::bog_id(K));
  p.gesture_ids.insert(p.gesture_ids.end(), interior.begin(), interior.end());
  p.gesture_ids.push_back(tokenizer::eog_id(K));
  if (options.positions == PositionScheme::shared) {
    p.gesture_positions.push_back(0);
    if (!interior.empty()) {
      if (tokens.empty()) throw DataError("transcript '" + transcript.id + "' has no words");
      for (int k : assign_positions(tokens, gestures.spans, fps)) p.gesture_positions.push_back(k + 1);
    }
    p.gesture_positions.push_back(eos_pos);
  } else {
    for (std::size_t i = 0; i < p.gesture_ids.size(); ++i) p.gesture_positions.push_back(eos_pos + 1 + static_cast<int>(i));
  }
  p.gesture_gold.assign(p.gesture_ids.size(), -1);
  return p;
}

PairedExample mask_tokens(const PairedExample& pair, double p_text, double p_gesture, std::mt19937_64& rng) {
  if (!(p_text >= 0 && p_text < 1) || !(p_gesture >= 0 && p_gesture < 1)) {
    throw UsageError("masking probabilities must lie in [0, 1)");
  }
  PairedExample out = pair;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  constexpr int kSpecials = 5;
  constexpr int kMask = 2;
  for (std::size_t i = 0; i < out.text_ids.size(); ++i) {
    const bool eligible = out.text_ids[i] >= kSpecials;
    const double draw = u(rng);
    if (eligible && draw < p_text) {
      out.text_gold[i] = out.text_ids[i];
      out.text_ids[i] = kMask;
    }
  }
  const int K = out.gesture_vocab;
  for (std::size_t i = 0; i < out.gesture_ids.size(); ++i) {
    const bool eligible = out.gesture_ids[i] >= 0 && out.gesture_ids[i] < K;
    const double draw = u(rng);
    if (eligible && draw < p_gesture) {
      out.gesture_gold[i] = out.gesture_ids[i];
      out.gesture_ids[i] = tokenizer::gmask_id(K);
    }
  }
  return out;
}

}  // namespace gesturelm::alignment
