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

#include "gesturelm/motion/skeleton.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gesturelm/error.hpp"

namespace gesturelm::motion {

Skeleton::Skeleton(std::vector<Joint> joints) : joints_(std::move(joints)) {
  if (joints_.empty()) throw DataError("skeleton has no joints");
  int roots = 0;
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const auto& j = joints_[i];
    if (!j.offset.allFinite()) throw DataError("skeleton joint '" + j.name + "' has a non-finite offset");
    if (j.parent < 0) {
      ++roots;
      if (i != 0) throw DataError("skeleton root must be joint 0");
    } else if (static_cast<std::size_t>(j.parent) >= i) {
      throw DataError("skeleton joint '" + j.name + "' must come after its parent");
    }
  }
  if (roots != 1) throw DataError("skeleton must have exactly one root");
}

Skeleton Skeleton::upper_body() {
  // y is up, x points to the character's left, arms in a T-pose rest.
  return Skeleton({
      {"spine1", -1, {0.0, 0.0, 0.0}},
      {"spine2", 0, {0.0, 0.12, 0.0}},
      {"spine3", 1, {0.0, 0.12, 0.0}},
      {"neck", 2, {0.0, 0.20, 0.0}},
      {"head", 3, {0.0, 0.10, 0.0}},
      {"l_collar", 2, {0.07, 0.15, 0.0}},
      {"l_shoulder", 5, {0.12, 0.0, 0.0}},
      {"l_elbow", 6, {0.27, 0.0, 0.0}},
      {"l_wrist", 7, {0.25, 0.0, 0.0}},
      {"r_collar", 2, {-0.07, 0.15, 0.0}},
      {"r_shoulder", 9, {-0.12, 0.0, 0.0}},
      {"r_elbow", 10, {-0.27, 0.0, 0.0}},
      {"r_wrist", 11, {-0.25, 0.0, 0.0}},
  });
}

Skeleton Skeleton::parse(const std::string& text) {
  std::vector<Joint> joints;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    Joint j;
    if (!(fields >> j.name)) continue;
    double x, y, z;
    if (!(fields >> j.parent >> x >> y >> z)) {
      throw DataError("skeleton config line " + std::to_string(line_no) + ": expected 'name parent x y z'");
    }
    j.offset = Vec3(x, y, z);
    joints.push_back(std::move(j));
  }
  return Skeleton(std::move(joints));
}

Skeleton Skeleton::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open skeleton config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Skeleton::to_text() const {
  // shortest round-trip form
  auto num = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  std::ostringstream out;
  out << "# name parent offset_x offset_y offset_z (meters)\n";
  for (const auto& j : joints_) {
    out << j.name << ' ' << j.parent << ' ' << num(j.offset.x()) << ' ' << num(j.offset.y()) << ' '
        << num(j.offset.z()) << '\n';
  }
  return out.str();
}

void Skeleton::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write skeleton config " + path.string());
  out << to_text();
}

int Skeleton::find(const std::string& name) const {
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (joints_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<Vec3> forward_kinematics(std::span<const Mat3> local_rotations, const Skeleton& skeleton) {
  if (local_rotations.size() != skeleton.size()) {
    throw UsageError("forward_kinematics: rotation count does not match skeleton");
  }
  std::vector<Mat3> global(skeleton.size());
  std::vector<Vec3> pos(skeleton.size(), Vec3::Zero());
  for (std::size_t j = 0; j < skeleton.size(); ++j) {
    const int p = skeleton.joint(j).parent;
    if (p < 0) {
      global[j] = local_rotations[j];
      continue;
    }
    pos[j] = pos[p] + global[p] * skeleton.joint(j).offset;
    global[j] = global[p] * local_rotations[j];
  }
  return pos;
}

}  // namespace gesturelm::motion
