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

// Differentiable, row-batched versions of the rotation utilities. Rotation
// matrices are flattened row-major into 9 columns. These never throw on
// degenerate inputs: norms are floored so training stays finite, and the
// loss layer reports any NaN that slips through.

#pragma once

#include "gesturelm/motion/skeleton.hpp"
#include "gesturelm/nn/tensor.hpp"

namespace gesturelm::motion {

// [n x 6] -> [n x 9]
nn::Tensor sixd_to_rotmat_rows(const nn::Tensor& sixd);
// [n x 9] -> [n x 3] rotation vectors (axis * angle).
nn::Tensor rotvec_rows(const nn::Tensor& rotmats);
// [n x 9], [n x 9] -> [n x 1] geodesic angles.
nn::Tensor geodesic_rows(const nn::Tensor& a, const nn::Tensor& b);
// [F*J x 9] local rotations (frame-major) -> [F*J x 3] global positions.
nn::Tensor forward_kinematics_rows(const nn::Tensor& rotmats, const Skeleton& skeleton);
// [B*L x C] stacked sequences of length L -> [B*(L-1) x C] of
// (x_{t+1} - x_t) * fps within each sequence.
nn::Tensor frame_difference_rows(const nn::Tensor& x, nn::Index seq_len, double fps);

}  // namespace gesturelm::motion
