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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gesturelm::infill {

using Confusion = std::vector<std::vector<long>>;  // [gold][pred]

struct EvalReport {
  std::string task;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<std::string> labels;
  double accuracy = 0;  // percent
  double macro_f1 = 0;  // [0, 1]
  std::vector<double> f1;
  Confusion confusion;
  long total = 0;
};
void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

// Label indices; throws DataError on an empty set and UsageError on
// out-of-range labels. Per-class F1 is 0 when precision and recall are both
// undefined or zero; macro F1 averages all labels.
EvalReport evaluate(const std::vector<int>& gold, const std::vector<int>& predicted,
                    const std::vector<std::string>& labels);

// a - b entrywise; label lists and gold counts must agree.
Confusion relative_confusion(const EvalReport& a, const EvalReport& b);

// Label indices ordered by descending gold count (ties by label order).
std::vector<int> frequency_order(const Confusion& confusion);

// Rows/columns reordered by `order`; header row and first column hold labels.
void write_confusion_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
                         const Confusion& m, const std::vector<int>& order);
// Diverging heatmap (positive red, negative blue) of a signed matrix.
void write_heatmap_svg(const std::filesystem::path& path, const std::vector<std::string>& labels, const Confusion& m,
                       const std::vector<int>& order, const std::string& title);

struct Aggregate {
  std::string task;
  std::string variant;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracy;
  std::vector<double> macro_f1;
  double accuracy_mean = 0, accuracy_std = 0;
  double f1_mean = 0, f1_std = 0;
};
void to_json(nlohmann::json& j, const Aggregate& a);

// Mean and sample standard deviation (n - 1; 0 for a single value).
std::pair<double, double> mean_std(const std::vector<double>& values);
Aggregate aggregate(const std::vector<EvalReport>& reports);

// Runs every seed, writes <out>/seed_<s>.json per report (when out is not
// empty) and <out>/aggregate.json. A failing seed aborts with an error
// naming it.
Aggregate run_experiment(const std::vector<std::uint64_t>& seeds,
                         const std::function<EvalReport(std::uint64_t)>& run_seed,
                         const std::filesystem::path& out = {});

}  // namespace gesturelm::infill
