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

#include "gesturelm/motion/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gesturelm/error.hpp"

namespace gesturelm::motion {

Rotation6D Rotation6D::from_columns(const Vec3& a, const Vec3& b) {
  return Rotation6D{{a.x(), a.y(), a.z(), b.x(), b.y(), b.z()}};
}

Mat3 sixd_to_rotmat(const Rotation6D& r) {
  for (double v : r.values) {
    if (!std::isfinite(v)) throw NumericalError("6D rotation has a non-finite component");
  }
  const Vec3 a1 = r.first();
  const Vec3 a2 = r.second();
  const double n1 = a1.norm();
  if (n1 < kDegenerateEps) throw NumericalError("6D rotation: first vector is zero");
  const Vec3 b1 = a1 / n1;
  const Vec3 u = a2 - b1.dot(a2) * b1;
  const double n2 = u.norm();
  if (n2 < kDegenerateEps * std::max(1.0, a2.norm())) {
    throw NumericalError("6D rotation: vectors are parallel or the second is zero");
  }
  const Vec3 b2 = u / n2;
  Mat3 R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b1.cross(b2);
  return R;
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Rotation6D rotmat_to_sixd(const Mat3& R, double tol) {
  if (!is_rotation(R, tol)) throw UsageError("rotmat_to_sixd: matrix is not a rotation");
  return Rotation6D::from_columns(R.col(0), R.col(1));
}

AxisAngle rotmat_to_axis_angle(const Mat3& R) {
  const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double angle = std::acos(c);
  AxisAngle out;
  out.angle = angle;
  if (angle < 1e-12) return out;  // axis fixed to +x
  const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double s = std::sin(angle);
  if (angle < std::numbers::pi - 1e-6 && s > 1e-9) {
    out.axis = w / (2.0 * s);
    out.axis.normalize();
    return out;
  }
  // Near pi the antisymmetric part vanishes; read the axis from (R + I) / 2,
  // which equals a a^T there, and use the antisymmetric part for the sign.
  const Mat3 B = (R + Mat3::Identity()) / 2.0;
  int k = 0;
  B.diagonal().maxCoeff(&k);
  Vec3 a = B.col(k) / std::sqrt(std::max(B(k, k), 1e-300));
  a.normalize();
  if (a.dot(w) < 0) a = -a;
  // A rotation by exactly pi is symmetric in the axis sign; prefer the
  // representative whose first nonzero component is positive.
  if (w.norm() < 1e-12) {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(a(i)) > 1e-12) {
        if (a(i) < 0) a = -a;
        break;
      }
    }
  }
  out.axis = a;
  return out;
}

Mat3 axis_angle_to_rotmat(const AxisAngle& aa) {
  return Eigen::AngleAxisd(aa.angle, aa.axis.normalized()).toRotationMatrix();
}

Vec3 rotmat_to_rotvec(const Mat3& R) {
  const AxisAngle aa = rotmat_to_axis_angle(R);
  return aa.axis * aa.angle;
}

Mat3 rotvec_to_rotmat(const Vec3& v) {
  const double angle = v.norm();
  if (angle < 1e-15) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

double geodesic_distance(const Mat3& R1, const Mat3& R2) {
  const double c = std::clamp(((R1.transpose() * R2).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace gesturelm::motion
