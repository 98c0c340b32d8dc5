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

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "gesturelm/error.hpp"

namespace gesturelm {

// Reads optional keys from a JSON object into existing (default) values and
// rejects keys nobody asked for. Usage:
//
//   ConfigReader r(j, "tokenizer");
//   r.get("epochs", cfg.epochs);
//   r.finish();
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw UsageError(where_ + ": expected a JSON object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(where_ + "." + key + ": " + e.what());
    }
  }

  // Sub-object handled by another reader; returns an empty object when absent.
  nlohmann::json child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nlohmann::json::object() : *it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw UsageError(where_ + ": unknown config key '" + it.key() + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace gesturelm
