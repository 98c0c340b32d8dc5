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
#include <unordered_map>
#include <vector>

namespace gesturelm::lm {

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";
inline constexpr const char* kMask = "<mask>";
inline constexpr const char* kPad = "<pad>";
inline constexpr const char* kUnk = "<unk>";

// Word-level vocabulary. Specials occupy ids 0..4 in the order above.
// Multi-word entries ("for example") are ordinary entries whose text
// contains a space; merge_phrases() turns word sequences into them.
class Vocab {
 public:
  Vocab();

  int add(const std::string& token);
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }
  // Unknown tokens map to <unk>.
  int id(const std::string& token) const;
  // Throws UsageError for unknown tokens.
  int require(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  int bos() const { return 0; }
  int eos() const { return 1; }
  int mask() const { return 2; }
  int pad() const { return 3; }
  int unk() const { return 4; }
  bool is_special(int id) const { return id >= 0 && id < 5; }

  // Longest phrase (in words) among the entries.
  int max_phrase_words() const { return max_phrase_words_; }

  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line, specials first.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);
  static Vocab from_tokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int max_phrase_words_ = 1;
};

std::string lowercase(std::string s);
// Lowercased whitespace split.
std::vector<std::string> split_words(const std::string& text);

// Greedy longest-first merge of consecutive words into multi-word vocab
// entries. Returns, for each output token, [first word, last word] indices.
struct MergedToken {
  std::string text;
  int first_word = 0;
  int last_word = 0;
};
std::vector<MergedToken> merge_phrases(const std::vector<std::string>& words, const Vocab& vocab);

// Vocabulary holding `required` entries (e.g. multi-word markers) first and
// then every merged token of `texts` in order of first appearance.
Vocab build_vocab(const std::vector<std::string>& texts, const std::vector<std::string>& required);

// Merged token ids of a text (no <s>/</s>).
std::vector<int> encode_text(const std::string& text, const Vocab& vocab);

}  // namespace gesturelm::lm
