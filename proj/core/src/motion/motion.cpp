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

#include "gesturelm/motion/motion.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "gesturelm/error.hpp"

namespace gesturelm::motion {

static_assert(std::endian::native == std::endian::little, "motion files assume a little-endian host");

MotionSequence::MotionSequence(int frames, int joints, double fps)
    : data_(FrameMatrix::Zero(frames, static_cast<nn::Index>(joints) * 6)), joints_(joints), fps_(fps) {
  if (frames <= 0 || joints <= 0) throw UsageError("motion needs at least one frame and one joint");
  if (!(fps > 0)) throw UsageError("motion fps must be positive");
  for (int f = 0; f < frames; ++f) {
    for (int j = 0; j < joints; ++j) {
      data_(f, 6 * j + 0) = 1.0;
      data_(f, 6 * j + 4) = 1.0;
    }
  }
}

MotionSequence::MotionSequence(FrameMatrix data, int joints, double fps)
    : data_(std::move(data)), joints_(joints), fps_(fps) {
  if (data_.rows() <= 0 || joints <= 0) throw UsageError("motion needs at least one frame and one joint");
  if (data_.cols() != static_cast<nn::Index>(joints) * 6) throw UsageError("motion data width must be 6 * joints");
  if (!(fps > 0)) throw UsageError("motion fps must be positive");
}

Rotation6D MotionSequence::rotation(int frame, int joint) const {
  Rotation6D r;
  for (int k = 0; k < 6; ++k) r.values[k] = data_(frame, 6 * joint + k);
  return r;
}

void MotionSequence::set_rotation(int frame, int joint, const Rotation6D& r) {
  for (int k = 0; k < 6; ++k) data_(frame, 6 * joint + k) = r.values[k];
}

void MotionSequence::set_rotation(int frame, int joint, const Mat3& R) {
  set_rotation(frame, joint, Rotation6D::from_columns(R.col(0), R.col(1)));
}

Mat3 MotionSequence::rotmat(int frame, int joint) const { return sixd_to_rotmat(rotation(frame, joint)); }

void MotionSequence::validate() const {
  for (int f = 0; f < frames(); ++f) {
    for (int j = 0; j < joints_; ++j) {
      try {
        (void)rotmat(f, j);
      } catch (const NumericalError& e) {
        throw NumericalError("frame " + std::to_string(f) + " joint " + std::to_string(j) + ": " + e.what());
      }
    }
  }
}

MotionSequence MotionSequence::slice(int begin, int count) const {
  if (begin < 0 || count <= 0 || begin + count > frames()) throw UsageError("motion slice out of range");
  return MotionSequence(data_.middleRows(begin, count), joints_, fps_);
}

MotionSequence MotionSequence::padded_to_multiple(int multiple) const {
  if (multiple <= 0) throw UsageError("padding multiple must be positive");
  const int n = frames();
  const int target = ((n + multiple - 1) / multiple) * multiple;
  if (target == n) return *this;
  FrameMatrix out(target, data_.cols());
  out.topRows(n) = data_;
  for (int f = n; f < target; ++f) out.row(f) = data_.row(n - 1);
  return MotionSequence(std::move(out), joints_, fps_);
}

FrameMatrix MotionSequence::joint_positions(const Skeleton& skeleton) const {
  if (static_cast<int>(skeleton.size()) != joints_) throw UsageError("skeleton joint count does not match motion");
  FrameMatrix out(frames(), 3 * joints_);
  std::vector<Mat3> rots(static_cast<std::size_t>(joints_));
  for (int f = 0; f < frames(); ++f) {
    for (int j = 0; j < joints_; ++j) rots[j] = rotmat(f, j);
    const auto pos = forward_kinematics(rots, skeleton);
    for (int j = 0; j < joints_; ++j) out.block(f, 3 * j, 1, 3) = pos[j].transpose();
  }
  return out;
}

void write_motion(const std::filesystem::path& path, const MotionSequence& motion) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write motion file " + path.string());
  std::ostringstream header;
  header.precision(17);
  header << "GMOT " << motion.frames() << ' ' << motion.joints() << ' ' << motion.fps() << '\n';
  out << header.str();
  std::vector<float> buf(static_cast<std::size_t>(motion.data().size()));
  for (nn::Index i = 0; i < motion.data().size(); ++i) buf[i] = static_cast<float>(motion.data().data()[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw DataError("failed writing motion file " + path.string());
}

MotionSequence read_motion(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open motion file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.size() > 256) throw DataError("corrupt motion header in " + path.string());
  std::istringstream header(line);
  std::string magic;
  long long frames = 0, joints = 0;
  double fps = 0;
  if (!(header >> magic >> frames >> joints >> fps) || magic != "GMOT" || frames <= 0 || joints <= 0 ||
      frames > 10'000'000 || joints > 1000 || !(fps > 0) || !std::isfinite(fps)) {
    throw DataError("corrupt motion header in " + path.string());
  }
  const std::size_t count = static_cast<std::size_t>(frames * joints * 6);
  std::vector<float> buf(count);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)))) {
    throw DataError("truncated motion data in " + path.string());
  }
  FrameMatrix data(frames, joints * 6);
  for (std::size_t i = 0; i < count; ++i) data.data()[i] = static_cast<double>(buf[i]);
  return MotionSequence(std::move(data), static_cast<int>(joints), fps);
}

FrameMatrix finite_difference(const FrameMatrix& seq, double fps, int order) {
  if (order != 1 && order != 2) throw UsageError("finite_difference order must be 1 or 2");
  if (seq.rows() <= order) throw UsageError("sequence too short for finite difference of this order");
  FrameMatrix d = (seq.bottomRows(seq.rows() - 1) - seq.topRows(seq.rows() - 1)) * fps;
  if (order == 1) return d;
  return finite_difference(d, fps, 1);
}

FrameMatrix finite_difference(const MotionSequence& motion, int order) {
  return finite_difference(motion.data(), motion.fps(), order);
}

}  // namespace gesturelm::motion
