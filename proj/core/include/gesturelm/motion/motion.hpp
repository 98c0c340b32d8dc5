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

#include "gesturelm/motion/rotation.hpp"
#include "gesturelm/motion/skeleton.hpp"
#include "gesturelm/nn/tensor.hpp"

namespace gesturelm::motion {

using FrameMatrix = nn::Matrix;

inline constexpr int kDefaultJoints = 13;
inline constexpr double kDefaultFps = 15.0;

// N frames x J joints of 6D rotations, stored as an [N x 6J] matrix
// (frame-major, joint-minor, 6 values per joint).
class MotionSequence {
 public:
  MotionSequence() = default;
  // Every joint at the identity rotation.
  MotionSequence(int frames, int joints, double fps);
  MotionSequence(FrameMatrix data, int joints, double fps);

  int frames() const { return static_cast<int>(data_.rows()); }
  int joints() const { return joints_; }
  double fps() const { return fps_; }
  double duration() const { return frames() / fps_; }

  const FrameMatrix& data() const { return data_; }
  FrameMatrix& data() { return data_; }

  Rotation6D rotation(int frame, int joint) const;
  void set_rotation(int frame, int joint, const Rotation6D& r);
  void set_rotation(int frame, int joint, const Mat3& R);
  Mat3 rotmat(int frame, int joint) const;

  // Throws NumericalError naming the first degenerate rotation.
  void validate() const;

  MotionSequence slice(int begin, int count) const;
  // Repeats the last frame until frames() is a multiple of `multiple`.
  MotionSequence padded_to_multiple(int multiple) const;

  // [N x 3J] global joint positions.
  FrameMatrix joint_positions(const Skeleton& skeleton) const;

 private:
  FrameMatrix data_;
  int joints_ = 0;
  double fps_ = kDefaultFps;
};

// Binary motion file: ASCII header line "GMOT <N> <J> <fps>\n" followed by
// N*J*6 little-endian float32 values, frame-major then joint-minor.
void write_motion(const std::filesystem::path& path, const MotionSequence& motion);
MotionSequence read_motion(const std::filesystem::path& path);

// Order 1: v_t = (x_{t+1} - x_t) * fps, N - 1 rows. Order 2 applies order 1
// to the result. Throws UsageError when rows <= order.
FrameMatrix finite_difference(const FrameMatrix& seq, double fps, int order);
FrameMatrix finite_difference(const MotionSequence& motion, int order);

}  // namespace gesturelm::motion
