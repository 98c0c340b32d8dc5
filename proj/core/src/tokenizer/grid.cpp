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

#include "gesturelm/tokenizer/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gesturelm/config_reader.hpp"
#include "gesturelm/error.hpp"

namespace gesturelm::tokenizer {

namespace {

// Bin of u in [0, 1] among n bins, boundaries to the lower bin.
int bin(double u, int n) {
  const int b = static_cast<int>(std::ceil(u * n)) - 1;
  return std::clamp(b, 0, n - 1);
}

}  // namespace

void GridSpec::validate() const {
  if (rows < 1 || cols < 1) throw UsageError("grid needs at least one row and column");
  if (!min.allFinite() || !max.allFinite() || !(max.x() > min.x()) || !(max.y() > min.y())) {
    throw UsageError("grid bounds are degenerate");
  }
}

void to_json(nlohmann::json& j, const GridSpec& g) {
  j = nlohmann::json{{"rows", g.rows},
                     {"cols", g.cols},
                     {"min", {g.min.x(), g.min.y()}},
                     {"max", {g.max.x(), g.max.y()}},
                     {"joint", g.joint}};
}

void read_config(const nlohmann::json& j, GridSpec& g) {
  ConfigReader r(j, "grid");
  r.get("rows", g.rows);
  r.get("cols", g.cols);
  std::vector<double> lo{g.min.x(), g.min.y()}, hi{g.max.x(), g.max.y()};
  r.get("min", lo);
  r.get("max", hi);
  r.get("joint", g.joint);
  r.finish();
  if (lo.size() != 2 || hi.size() != 2) throw UsageError("grid.min and grid.max take two numbers");
  g.min = {lo[0], lo[1]};
  g.max = {hi[0], hi[1]};
}

int grid_cell(const Point2& p, const GridSpec& grid) {
  grid.validate();
  const double u = (p.x() - grid.min.x()) / (grid.max.x() - grid.min.x());
  const double v = (grid.max.y() - p.y()) / (grid.max.y() - grid.min.y());
  return bin(v, grid.rows) * grid.cols + bin(u, grid.cols);
}

std::vector<int> grid_tokenize(std::span<const Point2> points, const GridSpec& grid, std::span<const FrameSpan> spans) {
  grid.validate();
  std::vector<int> ids;
  ids.reserve(spans.size());
  for (const auto& s : spans) {
    std::map<int, int> counts;
    const int end = std::min<int>(s.end, static_cast<int>(points.size()));
    for (int f = std::max(0, s.begin); f < end; ++f) ++counts[grid_cell(points[f], grid)];
    if (counts.empty()) throw UsageError("grid token span covers no frames");
    int best = -1, best_count = 0;
    for (const auto& [cell, count] : counts) {
      if (count > best_count) {
        best = cell;
        best_count = count;
      }
    }
    ids.push_back(best);
  }
  return ids;
}

std::vector<Point2> wrist_points(const motion::MotionSequence& m, const motion::Skeleton& skeleton,
                                 const std::string& joint) {
  const int w = skeleton.find(joint);
  const int ls = skeleton.find("l_shoulder");
  const int rs = skeleton.find("r_shoulder");
  if (w < 0 || ls < 0 || rs < 0) throw UsageError("skeleton lacks '" + joint + "' or the shoulder joints");
  const motion::FrameMatrix pos = m.joint_positions(skeleton);
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(m.frames()));
  for (int f = 0; f < m.frames(); ++f) {
    const motion::Vec3 l = pos.block(f, 3 * ls, 1, 3).transpose();
    const motion::Vec3 r = pos.block(f, 3 * rs, 1, 3).transpose();
    const motion::Vec3 p = pos.block(f, 3 * w, 1, 3).transpose();
    const double width = std::max((l - r).norm(), 1e-6);
    const motion::Vec3 rel = (p - 0.5 * (l + r)) / width;
    out.emplace_back(rel.x(), rel.y());
  }
  return out;
}

GestureTokenSeq grid_token_seq(const motion::MotionSequence& m, const motion::Skeleton& skeleton, const GridSpec& grid,
                               int frames_per_token, int window) {
  const motion::MotionSequence padded = m.padded_to_multiple(window);
  GestureTokenSeq out;
  for (int f = 0; f < padded.frames(); f += frames_per_token) out.spans.push_back({f, f + frames_per_token});
  const auto points = wrist_points(padded, skeleton, grid.joint);
  const auto cells = grid_tokenize(points, grid, out.spans);
  out.ids.push_back(grid.cells());
  out.ids.insert(out.ids.end(), cells.begin(), cells.end());
  out.ids.push_back(grid.cells() + 1);
  return out;
}

}  // namespace gesturelm::tokenizer
