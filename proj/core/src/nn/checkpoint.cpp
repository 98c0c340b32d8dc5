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

#include "gesturelm/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "gesturelm/error.hpp"

namespace gesturelm::nn {

namespace {

constexpr char kMagic[8] = {'G', 'L', 'M', 'T', 'E', 'N', 'S', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DataError("truncated tensor file: " + path.string());
  }
  return v;
}

}  // namespace

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.value().data()),
              static_cast<std::streamsize>(sizeof(Real) * static_cast<std::size_t>(t.value().size())));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

TensorMap load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw DataError("not a tensor container: " + path.string());
  }
  const auto count = get<std::uint32_t>(in, path);
  TensorMap out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw DataError("corrupt tensor name in " + path.string());
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("truncated tensor file: " + path.string());
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    if (rows > (1u << 28) || cols > (1u << 28)) throw DataError("corrupt tensor shape in " + path.string());
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    if (!in.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(Real) * static_cast<std::size_t>(m.size())))) {
      throw DataError("truncated tensor file: " + path.string());
    }
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

void assign_parameters(const NamedTensors& params, const TensorMap& values) {
  for (const auto& [name, t] : params) {
    auto it = values.find(name);
    if (it == values.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
    if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
      throw DataError("shape mismatch for tensor '" + name + "'");
    }
    Tensor handle = t;
    handle.mutable_value() = it->second;
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors, const nlohmann::json& meta) {
  save_tensors(path, tensors);
  std::ofstream out(sidecar_path(path));
  if (!out) throw DataError("cannot write " + sidecar_path(path).string());
  out << meta.dump(2) << '\n';
}

nlohmann::json load_metadata(const std::filesystem::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw DataError("missing checkpoint metadata " + sidecar_path(path).string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint metadata " + sidecar_path(path).string() + ": " + e.what());
  }
}

}  // namespace gesturelm::nn
