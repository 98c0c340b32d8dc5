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

// Named-tensor container files.
//
// Layout (little-endian):
//   "GLMTENS1"                         8-byte magic
//   u32 count
//   count x { u32 name_len, name bytes, u64 rows, u64 cols, rows*cols f64 }
//
// Metadata lives in a JSON sidecar next to the container: <path>.json.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "gesturelm/nn/module.hpp"

namespace gesturelm::nn {

using TensorMap = std::map<std::string, Matrix>;

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
TensorMap load_tensors(const std::filesystem::path& path);

// Copies values into live parameters. Missing names throw DataError; shape
// mismatches throw DataError. Extra entries in `values` are ignored.
void assign_parameters(const NamedTensors& params, const TensorMap& values);

std::filesystem::path sidecar_path(const std::filesystem::path& path);
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors, const nlohmann::json& meta);
nlohmann::json load_metadata(const std::filesystem::path& path);

}  // namespace gesturelm::nn
