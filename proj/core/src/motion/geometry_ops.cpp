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

#include "gesturelm/motion/geometry_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gesturelm/error.hpp"
#include "gesturelm/motion/rotation.hpp"

namespace gesturelm::motion {

using nn::Index;
using nn::Matrix;
using nn::Node;
using nn::Tensor;

namespace {

constexpr double kNormFloor = 1e-8;
// Beyond this angle the log map is read from the symmetric part, whose
// gradient we do not propagate.
constexpr double kNearPi = std::numbers::pi - 1e-3;

Mat3 row_to_mat(const Matrix& m, Index r) {
  Mat3 R;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) R(i, j) = m(r, 3 * i + j);
  return R;
}

void mat_to_row(const Mat3& R, Matrix& m, Index r) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(r, 3 * i + j) = R(i, j);
}

struct GramSchmidt {
  Vec3 b1, b2;
  double n1, n2, d;
};

GramSchmidt gram_schmidt(const Vec3& a1, const Vec3& a2) {
  GramSchmidt g;
  g.n1 = std::max(a1.norm(), kNormFloor);
  g.b1 = a1 / g.n1;
  g.d = g.b1.dot(a2);
  const Vec3 u = a2 - g.d * g.b1;
  g.n2 = std::max(u.norm(), kNormFloor);
  g.b2 = u / g.n2;
  return g;
}

}  // namespace

Tensor sixd_to_rotmat_rows(const Tensor& sixd) {
  if (sixd.cols() != 6) throw UsageError("sixd_to_rotmat_rows expects 6 columns");
  const Matrix& x = sixd.value();
  Matrix out(x.rows(), 9);
  for (Index r = 0; r < x.rows(); ++r) {
    const Vec3 a1(x(r, 0), x(r, 1), x(r, 2));
    const Vec3 a2(x(r, 3), x(r, 4), x(r, 5));
    const GramSchmidt g = gram_schmidt(a1, a2);
    Mat3 R;
    R.col(0) = g.b1;
    R.col(1) = g.b2;
    R.col(2) = g.b1.cross(g.b2);
    mat_to_row(R, out, r);
  }
  return nn::make_result(std::move(out), {sixd}, [](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    Matrix gx(x.rows(), 6);
    for (Index r = 0; r < x.rows(); ++r) {
      const Vec3 a1(x(r, 0), x(r, 1), x(r, 2));
      const Vec3 a2(x(r, 3), x(r, 4), x(r, 5));
      const GramSchmidt g = gram_schmidt(a1, a2);
      const Mat3 G = row_to_mat(n.grad, r);
      Vec3 gb1 = G.col(0);
      Vec3 gb2 = G.col(1);
      const Vec3 gb3 = G.col(2);
      // b3 = b1 x b2
      gb1 += g.b2.cross(gb3);
      gb2 += gb3.cross(g.b1);
      // b2 = u / |u|
      const Vec3 gu = (gb2 - g.b2 * g.b2.dot(gb2)) / g.n2;
      // u = a2 - d b1, d = b1 . a2
      Vec3 ga2 = gu;
      const double gd = -g.b1.dot(gu);
      gb1 += -g.d * gu + gd * a2;
      ga2 += gd * g.b1;
      // b1 = a1 / |a1|
      const Vec3 ga1 = (gb1 - g.b1 * g.b1.dot(gb1)) / g.n1;
      gx.block(r, 0, 1, 3) = ga1.transpose();
      gx.block(r, 3, 1, 3) = ga2.transpose();
    }
    n.inputs[0]->accumulate(gx);
  });
}

Tensor rotvec_rows(const Tensor& rotmats) {
  if (rotmats.cols() != 9) throw UsageError("rotvec_rows expects 9 columns");
  const Matrix& m = rotmats.value();
  Matrix out(m.rows(), 3);
  for (Index r = 0; r < m.rows(); ++r) {
    const Mat3 R = row_to_mat(m, r);
    const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
    const double theta = std::acos(c);
    const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    Vec3 v;
    if (theta < 1e-4) {
      v = (0.5 + theta * theta / 12.0) * w;
    } else if (theta < kNearPi) {
      v = theta / (2.0 * std::sin(theta)) * w;
    } else {
      v = rotmat_to_rotvec(R);
    }
    out.row(r) = v.transpose();
  }
  return nn::make_result(std::move(out), {rotmats}, [](Node& n) {
    const Matrix& m = n.inputs[0]->value;
    Matrix g = Matrix::Zero(m.rows(), 9);
    for (Index r = 0; r < m.rows(); ++r) {
      const Mat3 R = row_to_mat(m, r);
      const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
      const double theta = std::acos(c);
      if (theta >= kNearPi) continue;
      const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
      double f, df_dc;
      if (theta < 1e-4) {
        f = 0.5 + theta * theta / 12.0;
        df_dc = -(1.0 / 6.0 + theta * theta / 15.0);
      } else {
        const double s = std::sin(theta);
        f = theta / (2.0 * s);
        df_dc = -(s - theta * c) / (2.0 * s * s * s);
      }
      const Vec3 gv(n.grad(r, 0), n.grad(r, 1), n.grad(r, 2));
      const Vec3 gw = f * gv;
      const double gc = gv.dot(w) * df_dc;
      // c = (R00 + R11 + R22 - 1) / 2
      g(r, 0) += gc / 2.0;
      g(r, 4) += gc / 2.0;
      g(r, 8) += gc / 2.0;
      // w = (R21 - R12, R02 - R20, R10 - R01)
      g(r, 7) += gw(0);
      g(r, 5) -= gw(0);
      g(r, 2) += gw(1);
      g(r, 6) -= gw(1);
      g(r, 3) += gw(2);
      g(r, 1) -= gw(2);
    }
    n.inputs[0]->accumulate(g);
  });
}

Tensor geodesic_rows(const Tensor& a, const Tensor& b) {
  if (a.cols() != 9 || b.cols() != 9 || a.rows() != b.rows()) throw UsageError("geodesic_rows expects matching [n x 9]");
  const Matrix dots = a.value().cwiseProduct(b.value()).rowwise().sum();
  Matrix out(a.rows(), 1);
  Matrix slope(a.rows(), 1);
  constexpr double kEdge = 1e-7;
  for (Index r = 0; r < a.rows(); ++r) {
    const double c = (dots(r, 0) - 1.0) / 2.0;
    out(r, 0) = std::acos(std::clamp(c, -1.0, 1.0));
    // d theta / d trace; zero on the clamped edges where acos is not differentiable.
    slope(r, 0) = (c > -1.0 + kEdge && c < 1.0 - kEdge) ? -0.5 / std::sqrt(1.0 - c * c) : 0.0;
  }
  return nn::make_result(std::move(out), {a, b}, [slope = std::move(slope)](Node& n) {
    const Matrix coef = n.grad.cwiseProduct(slope);
    if (n.inputs[0]->requires_grad) {
      Matrix g = n.inputs[1]->value;
      g.array().colwise() *= coef.col(0).array();
      n.inputs[0]->accumulate(g);
    }
    if (n.inputs[1]->requires_grad) {
      Matrix g = n.inputs[0]->value;
      g.array().colwise() *= coef.col(0).array();
      n.inputs[1]->accumulate(g);
    }
  });
}

Tensor forward_kinematics_rows(const Tensor& rotmats, const Skeleton& skeleton) {
  const Index J = static_cast<Index>(skeleton.size());
  if (rotmats.cols() != 9 || rotmats.rows() % J != 0) {
    throw UsageError("forward_kinematics_rows expects [frames*joints x 9]");
  }
  const Index frames = rotmats.rows() / J;
  const Matrix& m = rotmats.value();
  Matrix pos(rotmats.rows(), 3);
  Matrix global(rotmats.rows(), 9);
  for (Index f = 0; f < frames; ++f) {
    const Index base = f * J;
    for (Index j = 0; j < J; ++j) {
      const int p = skeleton.joint(static_cast<std::size_t>(j)).parent;
      const Mat3 R = row_to_mat(m, base + j);
      if (p < 0) {
        mat_to_row(R, global, base + j);
        pos.row(base + j).setZero();
        continue;
      }
      const Mat3 Gp = row_to_mat(global, base + p);
      pos.row(base + j) = pos.row(base + p) + (Gp * skeleton.joint(static_cast<std::size_t>(j)).offset).transpose();
      mat_to_row(Gp * R, global, base + j);
    }
  }
  return nn::make_result(std::move(pos), {rotmats}, [global = std::move(global), skeleton, J, frames](Node& n) {
    const Matrix& m = n.inputs[0]->value;
    Matrix gR(m.rows(), 9);
    std::vector<Mat3> gG(static_cast<std::size_t>(J));
    std::vector<Vec3> gp(static_cast<std::size_t>(J));
    for (Index f = 0; f < frames; ++f) {
      const Index base = f * J;
      for (Index j = 0; j < J; ++j) {
        gG[j].setZero();
        gp[j] = n.grad.row(base + j).transpose();
      }
      for (Index j = J - 1; j >= 0; --j) {
        const int p = skeleton.joint(static_cast<std::size_t>(j)).parent;
        if (p < 0) {
          mat_to_row(gG[j], gR, base + j);
          continue;
        }
        const Vec3& off = skeleton.joint(static_cast<std::size_t>(j)).offset;
        const Mat3 Gp = row_to_mat(global, base + p);
        const Mat3 R = row_to_mat(m, base + j);
        gp[p] += gp[j];
        gG[p] += gp[j] * off.transpose();
        gG[p] += gG[j] * R.transpose();
        mat_to_row(Gp.transpose() * gG[j], gR, base + j);
      }
    }
    n.inputs[0]->accumulate(gR);
  });
}

Tensor frame_difference_rows(const Tensor& x, Index seq_len, double fps) {
  if (seq_len < 2 || x.rows() % seq_len != 0) throw UsageError("frame_difference_rows expects [B*L x C] with L >= 2");
  const Index seqs = x.rows() / seq_len;
  const Matrix& v = x.value();
  Matrix out(seqs * (seq_len - 1), v.cols());
  for (Index s = 0; s < seqs; ++s) {
    out.middleRows(s * (seq_len - 1), seq_len - 1) =
        (v.middleRows(s * seq_len + 1, seq_len - 1) - v.middleRows(s * seq_len, seq_len - 1)) * fps;
  }
  return nn::make_result(std::move(out), {x}, [seqs, seq_len, fps](Node& n) {
    Matrix g = Matrix::Zero(seqs * seq_len, n.grad.cols());
    for (Index s = 0; s < seqs; ++s) {
      const auto go = n.grad.middleRows(s * (seq_len - 1), seq_len - 1);
      g.middleRows(s * seq_len + 1, seq_len - 1) += go * fps;
      g.middleRows(s * seq_len, seq_len - 1) -= go * fps;
    }
    n.inputs[0]->accumulate(g);
  });
}

}  // namespace gesturelm::motion
