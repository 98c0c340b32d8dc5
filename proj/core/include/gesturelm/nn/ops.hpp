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

#include <cstdint>
#include <span>
#include <vector>

#include "gesturelm/nn/tensor.hpp"

namespace gesturelm::nn {

// Packed variable-length sequences: sequence i occupies rows
// [offsets[i], offsets[i] + lengths[i]) of a [total x width] matrix.
struct SeqLayout {
  std::vector<Index> offsets;
  std::vector<Index> lengths;

  static SeqLayout uniform(Index count, Index length);
  static SeqLayout from_lengths(std::span<const Index> lengths);
  Index total_rows() const;
  std::size_t size() const { return lengths.size(); }
};

// A row taken from one of several source tensors (see assemble_rows).
struct RowRef {
  std::uint32_t source;
  Index row;
};

Tensor matmul(const Tensor& a, const Tensor& b);
// x [n x in] * w [in x out] + b [1 x out]; b may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real s);
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor gelu(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps = 1e-5);

Tensor gather_rows(const Tensor& table, std::span<const Index> rows);
Tensor select_cols(const Tensor& x, std::span<const Index> cols);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, Index begin, Index count);
Tensor reshape(const Tensor& x, Index rows, Index cols);
Tensor assemble_rows(const std::vector<Tensor>& sources, std::span<const RowRef> refs);
// Each row repeated `times` consecutively.
Tensor repeat_rows(const Tensor& x, Index times);
// Consecutive groups of `group` rows averaged into one row.
Tensor mean_pool_rows(const Tensor& x, Index group);

// Multi-head scaled dot-product self-attention over packed sequences.
// key_valid (optional, one flag per row) excludes keys from attention.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const SeqLayout& layout,
                 int heads, std::span<const std::uint8_t> key_valid = {});

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Mean of squared elementwise differences.
Tensor mse(const Tensor& a, const Tensor& b);
// Mean over rows of -log softmax(logits)[target]. Zero rows -> constant 0.
Tensor cross_entropy(const Tensor& logits, std::span<const Index> targets);

// Row-wise softmax of a plain matrix (no graph).
Matrix softmax_rows(const Matrix& logits);

}  // namespace gesturelm::nn
