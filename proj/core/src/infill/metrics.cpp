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

#include "gesturelm/infill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "gesturelm/error.hpp"

namespace gesturelm::infill {

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"task", r.task},         {"variant", r.variant},   {"seed", r.seed},   {"labels", r.labels},
       {"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}, {"f1", r.f1},       {"confusion", r.confusion},
       {"total", r.total}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.task = j.at("task").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.labels = j.at("labels").get<std::vector<std::string>>();
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.f1 = j.at("f1").get<std::vector<double>>();
  r.confusion = j.at("confusion").get<Confusion>();
  r.total = j.at("total").get<long>();
}

EvalReport evaluate(const std::vector<int>& gold, const std::vector<int>& predicted,
                    const std::vector<std::string>& labels) {
  if (gold.empty()) throw DataError("cannot evaluate an empty test set");
  if (gold.size() != predicted.size()) throw UsageError("gold and predicted lengths differ");
  const int n = static_cast<int>(labels.size());
  EvalReport r;
  r.labels = labels;
  r.confusion.assign(n, std::vector<long>(n, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= n || predicted[i] < 0 || predicted[i] >= n) {
      throw UsageError("label index out of range in evaluation");
    }
    ++r.confusion[gold[i]][predicted[i]];
  }
  r.total = static_cast<long>(gold.size());
  long correct = 0;
  for (int c = 0; c < n; ++c) correct += r.confusion[c][c];
  r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(r.total);
  r.f1.assign(n, 0.0);
  for (int c = 0; c < n; ++c) {
    long col = 0, row = 0;
    for (int k = 0; k < n; ++k) {
      col += r.confusion[k][c];
      row += r.confusion[c][k];
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    if (tp > 0) {
      const double p = tp / static_cast<double>(col), rec = tp / static_cast<double>(row);
      r.f1[c] = 2 * p * rec / (p + rec);
    }
  }
  r.macro_f1 = n > 0 ? std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / n : 0.0;
  return r;
}

Confusion relative_confusion(const EvalReport& a, const EvalReport& b) {
  if (a.labels != b.labels) throw UsageError("relative confusion needs identical label lists");
  const std::size_t n = a.labels.size();
  if (a.confusion.size() != n || b.confusion.size() != n) throw DataError("confusion matrix size mismatch");
  Confusion out(n, std::vector<long>(n, 0));
  for (std::size_t g = 0; g < n; ++g) {
    long ra = 0, rb = 0;
    for (std::size_t p = 0; p < n; ++p) {
      out[g][p] = a.confusion[g][p] - b.confusion[g][p];
      ra += a.confusion[g][p];
      rb += b.confusion[g][p];
    }
    if (ra != rb) throw UsageError("relative confusion needs a shared test set (gold counts differ)");
  }
  return out;
}

std::vector<int> frequency_order(const Confusion& confusion) {
  std::vector<long> rows;
  for (const auto& r : confusion) rows.push_back(std::accumulate(r.begin(), r.end(), 0L));
  std::vector<int> order(confusion.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return rows[x] > rows[y]; });
  return order;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace

void write_confusion_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
                         const Confusion& m, const std::vector<int>& order) {
  auto out = open_out(path);
  out << "gold\\pred";
  for (int c : order) out << ',' << csv_field(labels[c]);
  out << '\n';
  for (int r : order) {
    out << csv_field(labels[r]);
    for (int c : order) out << ',' << m[r][c];
    out << '\n';
  }
}

void write_heatmap_svg(const std::filesystem::path& path, const std::vector<std::string>& labels, const Confusion& m,
                       const std::vector<int>& order, const std::string& title) {
  const int n = static_cast<int>(order.size());
  const int cell = 28, left = 110, top = 120;
  long peak = 1;
  for (const auto& r : m) {
    for (long v : r) peak = std::max(peak, std::abs(v));
  }
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + n * cell + 20 << "\" height=\""
      << top + n * cell + 20 << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"10\" y=\"18\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  for (int i = 0; i < n; ++i) {
    const std::string name = xml_escape(labels[order[i]]);
    out << "<text x=\"" << left - 6 << "\" y=\"" << top + i * cell + cell / 2 + 4 << "\" text-anchor=\"end\">" << name
        << "</text>\n";
    const int x = left + i * cell + cell / 2;
    out << "<text x=\"" << x << "\" y=\"" << top - 6 << "\" transform=\"rotate(-60 " << x << ' ' << top - 6 << ")\">"
        << name << "</text>\n";
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const long v = m[order[r]][order[c]];
      const double t = static_cast<double>(std::abs(v)) / static_cast<double>(peak);
      const int fade = static_cast<int>(std::lround(255 * (1 - t)));
      char color[8];
      std::snprintf(color, sizeof color, v >= 0 ? "#ff%02x%02x" : "#%02x%02xff", fade, fade);
      out << "<rect x=\"" << left + c * cell << "\" y=\"" << top + r * cell << "\" width=\"" << cell << "\" height=\""
          << cell << "\" fill=\"" << color << "\" stroke=\"#ccc\"/>\n";
      if (v != 0) {
        out << "<text x=\"" << left + c * cell + cell / 2 << "\" y=\"" << top + r * cell + cell / 2 + 4
            << "\" text-anchor=\"middle\">" << v << "</text>\n";
      }
    }
  }
  out << "</svg>\n";
}

void to_json(nlohmann::json& j, const Aggregate& a) {
  j = {{"task", a.task},
       {"variant", a.variant},
       {"seeds", a.seeds},
       {"accuracy", a.accuracy},
       {"macro_f1", a.macro_f1},
       {"accuracy_mean", a.accuracy_mean},
       {"accuracy_std", a.accuracy_std},
       {"f1_mean", a.f1_mean},
       {"f1_std", a.f1_std}};
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) throw DataError("mean of an empty list");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end()) {
    return {values.front(), 0.0};
  }
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1))};
}

Aggregate aggregate(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw DataError("no reports to aggregate");
  Aggregate a;
  a.task = reports.front().task;
  a.variant = reports.front().variant;
  for (const auto& r : reports) {
    a.seeds.push_back(r.seed);
    a.accuracy.push_back(r.accuracy);
    a.macro_f1.push_back(r.macro_f1);
  }
  std::tie(a.accuracy_mean, a.accuracy_std) = mean_std(a.accuracy);
  std::tie(a.f1_mean, a.f1_std) = mean_std(a.macro_f1);
  return a;
}

Aggregate run_experiment(const std::vector<std::uint64_t>& seeds,
                         const std::function<EvalReport(std::uint64_t)>& run_seed, const std::filesystem::path& out) {
  if (seeds.empty()) throw UsageError("run_experiment needs at least one seed");
  std::vector<EvalReport> reports;
  for (std::uint64_t s : seeds) {
    try {
      reports.push_back(run_seed(s));
    } catch (const Error& e) {
      const std::string msg = "seed " + std::to_string(s) + " failed: " + e.what();
      switch (e.kind()) {
        case ErrorKind::kUsage: throw UsageError(msg);
        case ErrorKind::kData: throw DataError(msg);
        case ErrorKind::kNumerical: throw NumericalError(msg);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("seed " + std::to_string(s) + " failed: " + e.what());
    }
    reports.back().seed = s;
    if (!out.empty()) open_out(out / ("seed_" + std::to_string(s) + ".json")) << nlohmann::json(reports.back()).dump(2);
  }
  Aggregate a = aggregate(reports);
  if (!out.empty()) open_out(out / "aggregate.json") << nlohmann::json(a).dump(2);
  return a;
}

}  // namespace gesturelm::infill
