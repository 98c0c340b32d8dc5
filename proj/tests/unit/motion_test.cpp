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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "gesturelm/error.hpp"
#include "gesturelm/motion/geometry_ops.hpp"
#include "gesturelm/motion/motion.hpp"
#include "gesturelm/nn/module.hpp"
#include "gesturelm/nn/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/random_rotation.hpp"

namespace gesturelm::motion {
namespace {

using testing::random_rotation;
constexpr double kPi = std::numbers::pi;

Mat3 rot_about(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(); }

TEST(SixD, Examples) {
  EXPECT_TRUE(sixd_to_rotmat(Rotation6D{}).isApprox(Mat3::Identity(), 1e-15));
  EXPECT_TRUE(sixd_to_rotmat(Rotation6D{{2, 0, 0, 0, 3, 0}}).isApprox(Mat3::Identity(), 1e-15));
  const Mat3 Rz = rot_about(Vec3::UnitZ(), kPi / 2);
  const Rotation6D r = rotmat_to_sixd(Rz);
  for (int k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(r.values[k], Rz(k, 0));
    EXPECT_DOUBLE_EQ(r.values[3 + k], Rz(k, 1));
  }
}

TEST(SixD, DegenerateInputsThrow) {
  EXPECT_THROW(sixd_to_rotmat(Rotation6D{{0, 0, 0, 0, 1, 0}}), NumericalError);
  EXPECT_THROW(sixd_to_rotmat(Rotation6D{{1, 0, 0, 2, 0, 0}}), NumericalError);
  EXPECT_THROW(sixd_to_rotmat(Rotation6D{{NAN, 0, 0, 0, 1, 0}}), NumericalError);
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 1.1;
  EXPECT_THROW(rotmat_to_sixd(bad), UsageError);
}

TEST(SixD, RandomInputsGiveRotations) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int i = 0; i < 2000; ++i) {
    Rotation6D r;
    for (auto& v : r.values) v = n(rng);
    const Mat3 R = sixd_to_rotmat(r);
    EXPECT_LT((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-6);
    // Normalized representative round-trips.
    EXPECT_LT((sixd_to_rotmat(rotmat_to_sixd(R)) - R).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(AxisAngleTest, Examples) {
  const AxisAngle id = rotmat_to_axis_angle(Mat3::Identity());
  EXPECT_EQ(id.angle, 0.0);
  EXPECT_EQ(id.axis, Vec3::UnitX());
  const AxisAngle half = rotmat_to_axis_angle(rot_about(Vec3::UnitX(), kPi));
  EXPECT_NEAR(half.angle, kPi, 1e-12);
  EXPECT_NEAR(half.axis.x(), 1.0, 1e-12);
}

TEST(AxisAngleTest, RandomRoundTrip) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const Mat3 R = random_rotation(rng);
    const AxisAngle aa = rotmat_to_axis_angle(R);
    EXPECT_GE(aa.angle, 0.0);
    EXPECT_LE(aa.angle, kPi);
    EXPECT_LT((axis_angle_to_rotmat(aa) - R).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LT((rotvec_to_rotmat(rotmat_to_rotvec(R)) - R).cwiseAbs().maxCoeff(), 1e-5);
  }
  // Near pi the symmetric-part branch must still recover the axis.
  for (double eps : {1e-3, 1e-6, 1e-9, 0.0}) {
    const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
    const Mat3 R = rot_about(axis, kPi - eps);
    EXPECT_LT((axis_angle_to_rotmat(rotmat_to_axis_angle(R)) - R).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Geodesic, ExamplesAndOracle) {
  std::mt19937_64 rng(3);
  const Mat3 R = random_rotation(rng);
  EXPECT_EQ(geodesic_distance(R, R) < 1e-7, true);
  EXPECT_NEAR(geodesic_distance(Mat3::Identity(), rot_about(Vec3::UnitZ(), kPi)), kPi, 1e-9);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 A = random_rotation(rng), B = random_rotation(rng), C = random_rotation(rng);
    const double ab = geodesic_distance(A, B);
    // Independent angle of the relative rotation via Eigen's axis-angle.
    const double oracle = Eigen::AngleAxisd(Mat3(A.transpose() * B)).angle();
    EXPECT_NEAR(ab, oracle, 1e-6);
    EXPECT_NEAR(ab, geodesic_distance(B, A), 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, geodesic_distance(A, C) + geodesic_distance(C, B) + 1e-5);
  }
}

TEST(Kinematics, IdentityPoseIsCumulativeOffsets) {
  const Skeleton sk = Skeleton::upper_body();
  std::vector<Mat3> rots(sk.size(), Mat3::Identity());
  const auto pos = forward_kinematics(rots, sk);
  EXPECT_EQ(pos[0], Vec3::Zero());
  for (std::size_t j = 1; j < sk.size(); ++j) {
    Vec3 expect = Vec3::Zero();
    for (int k = static_cast<int>(j); k > 0; k = sk.joint(k).parent) expect += sk.joint(k).offset;
    EXPECT_LT((pos[j] - expect).norm(), 1e-12);
  }
}

TEST(Kinematics, RootYawByPiNegatesHorizontalPlane) {
  // All offsets in the x-z plane; y is vertical.
  const Skeleton sk({{"root", -1, {0, 0, 0}}, {"a", 0, {0.3, 0, 0.1}}, {"b", 1, {0, 0, -0.2}}, {"c", 0, {-0.1, 0, 0.4}}});
  std::mt19937_64 rng(4);
  std::vector<Mat3> rots{Mat3::Identity(), rot_about(Vec3::UnitY(), 0.4), Mat3::Identity(), rot_about(Vec3::UnitY(), -1.1)};
  const auto base = forward_kinematics(rots, sk);
  rots[0] = rot_about(Vec3::UnitY(), kPi);
  const auto turned = forward_kinematics(rots, sk);
  for (std::size_t j = 1; j < sk.size(); ++j) {
    EXPECT_NEAR(turned[j].x(), -base[j].x(), 1e-12);
    EXPECT_NEAR(turned[j].y(), base[j].y(), 1e-12);
    EXPECT_NEAR(turned[j].z(), -base[j].z(), 1e-12);
  }
}

TEST(Kinematics, ThreeJointChainMatchesMatrixProducts) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 o1(n(rng), n(rng), n(rng)), o2(n(rng), n(rng), n(rng));
    const Skeleton sk({{"a", -1, Vec3::Zero()}, {"b", 0, o1}, {"c", 1, o2}});
    const std::vector<Mat3> r{random_rotation(rng), random_rotation(rng), random_rotation(rng)};
    const auto pos = forward_kinematics(r, sk);
    EXPECT_EQ(pos[0], Vec3::Zero());
    EXPECT_LT((pos[1] - r[0] * o1).norm(), 1e-6);
    EXPECT_LT((pos[2] - (r[0] * o1 + r[0] * r[1] * o2)).norm(), 1e-6);
  }
}

TEST(Kinematics, RootPreRotationIsRigid) {
  const Skeleton sk = Skeleton::upper_body();
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Mat3> rots;
    for (std::size_t j = 0; j < sk.size(); ++j) rots.push_back(random_rotation(rng));
    const auto base = forward_kinematics(rots, sk);
    const Mat3 Q = random_rotation(rng);
    rots[0] = Q * rots[0];
    const auto moved = forward_kinematics(rots, sk);
    for (std::size_t j = 0; j < sk.size(); ++j) EXPECT_LT((moved[j] - Q * base[j]).norm(), 1e-6);
  }
}

TEST(SkeletonTest, ConfigRoundTripAndValidation) {
  const Skeleton sk = Skeleton::upper_body();
  EXPECT_EQ(sk.size(), static_cast<std::size_t>(kDefaultJoints));
  const Skeleton back = Skeleton::parse(sk.to_text());
  ASSERT_EQ(back.size(), sk.size());
  for (std::size_t j = 0; j < sk.size(); ++j) {
    EXPECT_EQ(back.joint(j).name, sk.joint(j).name);
    EXPECT_EQ(back.joint(j).parent, sk.joint(j).parent);
    EXPECT_EQ(back.joint(j).offset, sk.joint(j).offset);
  }
  EXPECT_THROW(Skeleton::parse("a -1 0 0 0\nb 2 0 0 0\n"), DataError);
  EXPECT_THROW(Skeleton::parse("a -1 0 0 0\nb -1 0 0 0\n"), DataError);
  EXPECT_THROW(Skeleton::parse("a -1 0 0\n"), DataError);
  EXPECT_EQ(sk.find("r_wrist"), 12);
}

TEST(FiniteDifference, Cases) {
  FrameMatrix constant = FrameMatrix::Constant(6, 4, 0.7);
  EXPECT_TRUE(finite_difference(constant, 15.0, 1).isZero(0));
  EXPECT_TRUE(finite_difference(constant, 15.0, 2).isZero(0));
  FrameMatrix ramp(10, 2);
  for (int t = 0; t < 10; ++t) ramp.row(t).setConstant(t / 15.0);
  EXPECT_TRUE(finite_difference(ramp, 15.0, 1).isApprox(FrameMatrix::Ones(9, 2), 1e-12));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  FrameMatrix x(8, 3);
  for (nn::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  const FrameMatrix v = finite_difference(x, 30.0, 1);
  ASSERT_EQ(v.rows(), 7);
  for (int t = 0; t < 7; ++t)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(v(t, c), (x(t + 1, c) - x(t, c)) * 30.0);
  EXPECT_TRUE(finite_difference(x, 30.0, 2) == finite_difference(v, 30.0, 1));
  EXPECT_THROW(finite_difference(FrameMatrix::Zero(2, 1), 15.0, 2), UsageError);
  EXPECT_THROW(finite_difference(FrameMatrix::Zero(1, 1), 15.0, 1), UsageError);
}

TEST(MotionFile, RoundTripIsBitExactForFloatValues) {
  std::mt19937_64 rng(8);
  std::normal_distribution<float> n;
  FrameMatrix data(5, 12);
  for (nn::Index i = 0; i < data.size(); ++i) data.data()[i] = static_cast<double>(n(rng));
  const MotionSequence m(data, 2, 15.0);
  const auto path = std::filesystem::temp_directory_path() / "gesturelm_motion_test.gmot";
  write_motion(path, m);
  const MotionSequence back = read_motion(path);
  EXPECT_EQ(back.frames(), 5);
  EXPECT_EQ(back.joints(), 2);
  EXPECT_EQ(back.fps(), 15.0);
  EXPECT_TRUE(back.data() == m.data());
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(read_motion(path), DataError);
  std::filesystem::remove(path);
}

TEST(MotionSequenceTest, PaddingAndSlicing) {
  MotionSequence m(5, 2, 15.0);
  m.set_rotation(4, 1, rot_about(Vec3::UnitZ(), 0.3));
  const MotionSequence p = m.padded_to_multiple(4);
  EXPECT_EQ(p.frames(), 8);
  for (int f = 5; f < 8; ++f) EXPECT_TRUE(p.data().row(f) == m.data().row(4));
  EXPECT_EQ(m.slice(1, 3).frames(), 3);
  EXPECT_THROW(m.slice(3, 3), UsageError);
  m.set_rotation(2, 0, Rotation6D{{0, 0, 0, 0, 0, 0}});
  EXPECT_THROW(m.validate(), NumericalError);
}

nn::Tensor random_sixd(int rows, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  nn::Matrix m(rows, 6);
  for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return nn::Tensor(m, true);
}

TEST(GeometryOps, BatchedMatchesScalar) {
  std::mt19937_64 rng(9);
  nn::Tensor x = random_sixd(20, rng);
  const nn::Matrix R = sixd_to_rotmat_rows(x).value();
  const nn::Matrix v = rotvec_rows(nn::Tensor(R)).value();
  for (int r = 0; r < 20; ++r) {
    Rotation6D s;
    for (int k = 0; k < 6; ++k) s.values[k] = x.value()(r, k);
    const Mat3 ref = sixd_to_rotmat(s);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(R(r, 3 * i + j), ref(i, j), 1e-12);
    const Vec3 rv = rotmat_to_rotvec(ref);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(v(r, k), rv(k), 1e-9);
  }
}

TEST(GeometryOps, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  nn::Tensor a = random_sixd(6, rng), b = random_sixd(6, rng);
  auto r1 = testing::check_gradients({a, b}, [&] {
    nn::Tensor ra = sixd_to_rotmat_rows(a), rb = sixd_to_rotmat_rows(b);
    return nn::add(nn::sum(geodesic_rows(ra, rb)), nn::sum(nn::mul(rotvec_rows(ra), rotvec_rows(rb))));
  });
  EXPECT_LT(r1.max_rel, 1e-4);

  const Skeleton sk({{"a", -1, Vec3::Zero()}, {"b", 0, {0.2, 0.1, 0}}, {"c", 1, {0, 0.3, 0.1}}});
  nn::Tensor c = random_sixd(6, rng);
  nn::Rng nrng(12);
  nn::Tensor target(nn::normal_matrix(6, 3, 0.3, nrng));
  auto r2 = testing::check_gradients({c}, [&] { return nn::mse(forward_kinematics_rows(sixd_to_rotmat_rows(c), sk), target); });
  EXPECT_LT(r2.max_rel, 1e-4);
}

TEST(GeometryOps, FkRowsMatchScalarFk) {
  std::mt19937_64 rng(11);
  const Skeleton sk = Skeleton::upper_body();
  MotionSequence m(3, kDefaultJoints, 15.0);
  for (int f = 0; f < 3; ++f)
    for (int j = 0; j < kDefaultJoints; ++j) m.set_rotation(f, j, random_rotation(rng));
  const nn::Tensor rows(nn::reshape(nn::Tensor(m.data()), 3 * kDefaultJoints, 6));
  const nn::Matrix pos = forward_kinematics_rows(sixd_to_rotmat_rows(rows), sk).value();
  const FrameMatrix ref = m.joint_positions(sk);
  for (int f = 0; f < 3; ++f)
    for (int j = 0; j < kDefaultJoints; ++j)
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(pos(f * kDefaultJoints + j, k), ref(f, 3 * j + k), 1e-12);
}

}  // namespace
}  // namespace gesturelm::motion
