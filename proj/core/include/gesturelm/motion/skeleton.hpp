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
#include <span>
#include <string>
#include <vector>

#include "gesturelm/motion/rotation.hpp"

namespace gesturelm::motion {

struct Joint {
  std::string name;
  int parent = -1;  // -1 for the root
  Vec3 offset = Vec3::Zero();  // meters, in the parent's frame
};

// Rooted joint tree. Parents always precede children (validated), so a
// single forward pass over joint indices visits the tree top-down.
class Skeleton {
 public:
  Skeleton() = default;
  explicit Skeleton(std::vector<Joint> joints);

  // 13-joint upper body: spine chain, neck, head, collar/shoulder/elbow/wrist per side.
  static Skeleton upper_body();

  // Text config: one joint per line, "name parent x y z"; '#' starts a comment.
  static Skeleton load(const std::filesystem::path& path);
  static Skeleton parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  std::string to_text() const;

  std::size_t size() const { return joints_.size(); }
  const Joint& joint(std::size_t i) const { return joints_[i]; }
  const std::vector<Joint>& joints() const { return joints_; }
  int find(const std::string& name) const;

 private:
  std::vector<Joint> joints_;
};

// Global joint positions with the root pinned at the origin:
// p_child = p_parent + G_parent * offset_child, G_child = G_parent * R_child.
std::vector<Vec3> forward_kinematics(std::span<const Mat3> local_rotations, const Skeleton& skeleton);

}  // namespace gesturelm::motion
