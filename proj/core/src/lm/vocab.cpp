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

#include "gesturelm/lm/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "gesturelm/error.hpp"

namespace gesturelm::lm {

Vocab::Vocab() {
  for (const char* s : {kBos, kEos, kMask, kPad, kUnk}) add(s);
}

int Vocab::add(const std::string& token) {
  if (token.empty()) throw UsageError("vocabulary tokens must be non-empty");
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int id = size();
  tokens_.push_back(token);
  ids_.emplace(token, id);
  const int words = static_cast<int>(std::count(token.begin(), token.end(), ' ')) + 1;
  max_phrase_words_ = std::max(max_phrase_words_, words);
  return id;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? unk() : it->second;
}

int Vocab::require(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw UsageError("token '" + token + "' is not in the vocabulary");
  return it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw UsageError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

void Vocab::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  const std::vector<std::string> specials{kBos, kEos, kMask, kPad, kUnk};
  if (tokens.size() < specials.size() || !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw DataError("vocabulary must start with the special tokens");
  }
  Vocab v;
  for (std::size_t i = specials.size(); i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw DataError("duplicate vocabulary entry '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return from_tokens(tokens);
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(lowercase(text));
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::vector<MergedToken> merge_phrases(const std::vector<std::string>& words, const Vocab& vocab) {
  std::vector<MergedToken> out;
  const int n = static_cast<int>(words.size());
  for (int i = 0; i < n;) {
    int taken = 1;
    std::string text = words[i];
    for (int len = std::min(vocab.max_phrase_words(), n - i); len > 1; --len) {
      std::string phrase = words[i];
      for (int k = 1; k < len; ++k) phrase += ' ' + words[i + k];
      if (vocab.contains(phrase)) {
        taken = len;
        text = std::move(phrase);
        break;
      }
    }
    out.push_back({text, i, i + taken - 1});
    i += taken;
  }
  return out;
}

Vocab build_vocab(const std::vector<std::string>& texts, const std::vector<std::string>& required) {
  Vocab v;
  for (const auto& r : required) v.add(lowercase(r));
  for (const auto& t : texts) {
    for (const auto& m : merge_phrases(split_words(t), v)) v.add(m.text);
  }
  return v;
}

std::vector<int> encode_text(const std::string& text, const Vocab& vocab) {
  std::vector<int> ids;
  for (const auto& m : merge_phrases(split_words(text), vocab)) ids.push_back(vocab.id(m.text));
  return ids;
}

}  // namespace gesturelm::lm
