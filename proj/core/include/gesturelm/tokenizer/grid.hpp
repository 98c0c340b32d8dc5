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

// Grid-cell baseline tokenizer: the wrist's 2D position is binned on a
// rows x cols grid and each token span takes its majority cell.

#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "gesturelm/motion/motion.hpp"
#include "gesturelm/tokenizer/vqvae.hpp"

namespace gesturelm::tokenizer {

using Point2 = Eigen::Vector2d;

struct GridSpec {
  int rows = 12;
  int cols = 12;
  // x grows to the right, y grows upward; row 0 is the top row.
  Point2 min{-2.0, -2.0};
  Point2 max{2.0, 2.0};
  std::string joint = "r_wrist";

  int cells() const { return rows * cols; }
  void validate() const;
};

void to_json(nlohmann::json& j, const GridSpec& g);
void read_config(const nlohmann::json& j, GridSpec& g);

// Cell id = row * cols + col. Points on a boundary go to the lower id; points
// outside the bounds clamp to the edge cells.
int grid_cell(const Point2& p, const GridSpec& grid);

// One id per span: the most frequent cell over the span's frames (ties to
// the lower id). Frames past the end of `points` are ignored.
std::vector<int> grid_tokenize(std::span<const Point2> points, const GridSpec& grid, std::span<const FrameSpan> spans);

// Frontal-plane (x, y) wrist position relative to the shoulder midpoint, in
// shoulder-width units.
std::vector<Point2> wrist_points(const motion::MotionSequence& m, const motion::Skeleton& skeleton,
                                 const std::string& joint);

// BOG + per-span cells + EOG with the same spans as the VQ tokenizer would
// produce for this motion; reserved ids are cells(), cells()+1, cells()+2.
GestureTokenSeq grid_token_seq(const motion::MotionSequence& m, const motion::Skeleton& skeleton, const GridSpec& grid,
                               int frames_per_token, int window);

}  // namespace gesturelm::tokenizer
