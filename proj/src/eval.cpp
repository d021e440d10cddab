// Copyright 2026 The bevmap Authors
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

#include "bevmap/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace bevmap {

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double centroid_distance(const BBox& a, const BBox& b) { return (a.center() - b.center()).norm(); }

SizeErrors size_errors(const BBox& pred, const BBox& truth) {
  if (!(truth.height() > 0) || !(truth.width() > 0))
    throw OutOfRangeError("size_errors: ground-truth box is degenerate");
  return {std::abs(pred.height() - truth.height()) / truth.height(),
          std::abs(pred.width() - truth.width()) / truth.width()};
}

double aspect_ratio_error(const BBox& pred, const BBox& truth) {
  if (!(pred.height() > 0) || !(truth.height() > 0))
    throw OutOfRangeError("aspect_ratio_error: box has zero height");
  return std::abs(pred.width() / pred.height() - truth.width() / truth.height());
}

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
  sum_ = t;
}

std::vector<double> default_bucket_edges() { return {5, 10, 15, 20, 25, 30}; }

std::size_t bucket_of(double distance, const std::vector<double>& edges) {
  if (distance < edges.front()) return 0;
  if (distance > edges.back()) return edges.size();
  if (distance == edges.back()) return edges.size() - 1;
  return std::size_t(std::upper_bound(edges.begin(), edges.end(), distance) - edges.begin());
}

ModelMetrics evaluate_predictions(const std::string& name, std::span<const DetectionRecord> records,
                                  std::span<const std::optional<BBox>> predictions,
                                  const std::vector<double>& edges) {
  if (records.empty()) throw ConfigError("evaluate: empty test set");
  if (predictions.size() != records.size())
    throw ConfigError("evaluate: one prediction slot per record is required");
  if (edges.empty()) throw ConfigError("evaluate: at least one bucket edge is required");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ConfigError("evaluate: bucket edges must increase");

  constexpr double inf = std::numeric_limits<double>::infinity();
  ModelMetrics m;
  m.name = name;
  const std::size_t n_buckets = edges.size() + 1;
  std::vector<CompensatedSum> bucket_iou(n_buckets);
  m.buckets.resize(n_buckets);
  for (std::size_t b = 0; b < n_buckets; ++b) {
    m.buckets[b].lo = b == 0 ? -inf : edges[b - 1];
    m.buckets[b].hi = b == edges.size() ? inf : edges[b];
  }
  CompensatedSum s_iou, s_cd, s_h, s_w, s_ar;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const BBox& truth = records[i].birdeye_box;
    const auto& pred = predictions[i];
    if (!pred || !(truth.height() > 0) || !(truth.width() > 0)) {
      ++m.excluded;
      continue;
    }
    const double v = iou(*pred, truth);
    const SizeErrors se = size_errors(*pred, truth);
    s_iou.add(v);
    s_cd.add(centroid_distance(*pred, truth));
    s_h.add(se.height);
    s_w.add(se.width);
    if (pred->height() > 0)
      s_ar.add(aspect_ratio_error(*pred, truth));
    else
      ++m.ar_undefined;
    const std::size_t b = bucket_of(records[i].distance_m, edges);
    bucket_iou[b].add(v);
    ++m.buckets[b].count;
    ++m.count;
  }
  const double n = double(m.count);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.mean_iou = m.count ? s_iou.value() / n : nan;
  m.mean_cd = m.count ? s_cd.value() / n : nan;
  m.mean_h_err = m.count ? s_h.value() / n : nan;
  m.mean_w_err = m.count ? s_w.value() / n : nan;
  m.mean_ar_err = m.count > m.ar_undefined ? s_ar.value() / double(m.count - m.ar_undefined) : nan;
  for (std::size_t b = 0; b < n_buckets; ++b)
    if (m.buckets[b].count) m.buckets[b].mean_iou = bucket_iou[b].value() / double(m.buckets[b].count);
  return m;
}

ModelMetrics evaluate(const std::string& name, const BatchPredictor& predictor,
                      std::span<const DetectionRecord> records, const std::vector<double>& edges) {
  const auto predictions = predictor(records);
  return evaluate_predictions(name, records, predictions, edges);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_metrics_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "model,count,excluded,iou,cd,hE,wE,arE\n";
  for (const auto& m : report.models)
    out << m.name << ',' << m.count << ',' << m.excluded << ',' << format_double(m.mean_iou) << ','
        << format_double(m.mean_cd) << ',' << format_double(m.mean_h_err) << ','
        << format_double(m.mean_w_err) << ',' << format_double(m.mean_ar_err) << '\n';
  return out.str();
}

std::string format_iou_by_distance_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "bucket_min_m,bucket_max_m";
  for (const auto& m : report.models) out << ',' << m.name;
  for (const auto& m : report.models) out << ",n_" << m.name;
  out << '\n';
  const std::size_t n_buckets = report.edges.size() + 1;
  for (std::size_t b = 0; b < n_buckets; ++b) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    out << format_double(b == 0 ? -inf : report.edges[b - 1]) << ','
        << format_double(b == report.edges.size() ? inf : report.edges[b]);
    for (const auto& m : report.models)
      out << ',' << (m.buckets.at(b).mean_iou ? format_double(*m.buckets[b].mean_iou) : "");
    for (const auto& m : report.models) out << ',' << m.buckets.at(b).count;
    out << '\n';
  }
  return out.str();
}

std::string render_iou_chart_svg(const MetricReport& report) {
  constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 140, kTop = 30, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  const double x0 = report.edges.front(), x1 = report.edges.back();
  const double span = x1 > x0 ? x1 - x0 : 1.0;
  auto px = [&](double d) { return kLeft + (d - x0) / span * plot_w; };
  auto py = [&](double v) { return kTop + (1.0 - v) * plot_h; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(kLeft + plot_w)
      << "\" y2=\"" << num(py(0)) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(0)) << "\" x2=\"" << kLeft << "\" y2=\""
      << num(py(1)) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    out << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(v) + 4)
        << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  for (double e : report.edges)
    out << "<text x=\"" << num(px(e)) << "\" y=\"" << num(py(0) + 18)
        << "\" text-anchor=\"middle\">" << format_double(e) << "</text>\n";
  out << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 10)
      << "\" text-anchor=\"middle\">distance (m)</text>\n";
  out << "<text x=\"15\" y=\"" << num(kTop + plot_h / 2) << "\" transform=\"rotate(-90 15 "
      << num(kTop + plot_h / 2) << ")\" text-anchor=\"middle\">mean IoU</text>\n";

  for (std::size_t k = 0; k < report.models.size(); ++k) {
    const auto& m = report.models[k];
    const char* color = kColors[k % 8];
    // One polyline per run of consecutive non-empty interior buckets.
    std::vector<std::string> run;
    auto flush = [&] {
      if (run.size() > 1) {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < run.size(); ++i) out << (i ? " " : "") << run[i];
        out << "\"/>\n";
      }
      run.clear();
    };
    for (std::size_t b = 1; b + 1 < m.buckets.size(); ++b) {
      const auto& bucket = m.buckets[b];
      if (!bucket.mean_iou) {
        flush();
        continue;
      }
      const double x = px(0.5 * (bucket.lo + bucket.hi)), y = py(*bucket.mean_iou);
      run.push_back(num(x) + "," + num(y));
      out << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    flush();
    const double ly = kTop + 10 + 18.0 * double(k);
    out << "<line x1=\"" << num(kWidth - kRight + 10) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(kWidth - kRight + 30) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(kWidth - kRight + 36) << "\" y=\"" << num(ly + 4) << "\">" << m.name
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

void emit_report(const MetricReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  write_file(dir / "metrics.csv", format_metrics_csv(report));
  write_file(dir / "iou_by_distance.csv", format_iou_by_distance_csv(report));
  write_file(dir / "iou_by_distance.svg", render_iou_chart_svg(report));
}

}  // namespace bevmap
