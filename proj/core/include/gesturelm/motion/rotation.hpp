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

// Rotation representations used by the motion tokenizer.
//
// The 6D representation stores the first two columns of a rotation matrix,
// (c0x, c0y, c0z, c1x, c1y, c1z). Conversion back orthonormalizes them with
// Gram-Schmidt and completes the frame with a cross product.

#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gesturelm::motion {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Rotation6D {
  std::array<double, 6> values{1, 0, 0, 0, 1, 0};

  Vec3 first() const { return {values[0], values[1], values[2]}; }
  Vec3 second() const { return {values[3], values[4], values[5]}; }
  static Rotation6D from_columns(const Vec3& a, const Vec3& b);
};

struct AxisAngle {
  Vec3 axis = Vec3::UnitX();
  double angle = 0.0;  // radians, in [0, pi]
};

// Minimum norm / sine below which a 6D pair is treated as degenerate.
inline constexpr double kDegenerateEps = 1e-9;

// Throws NumericalError for non-finite, zero, or parallel column vectors.
Mat3 sixd_to_rotmat(const Rotation6D& r);
// Throws UsageError when R deviates from SO(3) by more than `tol`.
Rotation6D rotmat_to_sixd(const Mat3& R, double tol = 1e-4);

AxisAngle rotmat_to_axis_angle(const Mat3& R);
Mat3 axis_angle_to_rotmat(const AxisAngle& aa);
// axis * angle
Vec3 rotmat_to_rotvec(const Mat3& R);
Mat3 rotvec_to_rotmat(const Vec3& v);

// arccos((trace(R1^T R2) - 1) / 2) with the argument clamped to [-1, 1].
double geodesic_distance(const Mat3& R1, const Mat3& R2);

// max |R^T R - I| <= tol and |det R - 1| <= tol.
bool is_rotation(const Mat3& R, double tol = 1e-6);

}  // namespace gesturelm::motion
