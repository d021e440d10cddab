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

#ifndef BEVMAP_EVAL_HPP
#define BEVMAP_EVAL_HPP

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bevmap/core_types.hpp"

namespace bevmap {

/// Intersection over union; 0 for disjoint boxes and when both are degenerate.
double iou(const BBox& a, const BBox& b);

/// Euclidean distance between box centers.
double centroid_distance(const BBox& a, const BBox& b);

struct SizeErrors {
  double height = 0;  // |pred.h - truth.h| / truth.h
  double width = 0;   // |pred.w - truth.w| / truth.w
};

/// Throws OutOfRangeError when the truth box has zero width or height.
SizeErrors size_errors(const BBox& pred, const BBox& truth);

/// |pred.w / pred.h - truth.w / truth.h|; throws OutOfRangeError on a zero
/// height.
double aspect_ratio_error(const BBox& pred, const BBox& truth);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0;
  double comp_ = 0;
};

std::vector<double> default_bucket_edges();

/// Distance bucket. The first and last buckets of a report are open-ended
/// (lo = -inf, hi = +inf) and catch records outside the edges.
struct BucketStats {
  double lo = 0;
  double hi = 0;
  std::size_t count = 0;
  std::optional<double> mean_iou;  // none for an empty bucket
};

struct ModelMetrics {
  std::string name;
  std::size_t count = 0;     // records contributing to the means
  std::size_t excluded = 0;  // records lacking a prediction or with a degenerate truth box
  std::size_t ar_undefined = 0;  // zero-height predictions, left out of mean_ar_err only
  double mean_iou = 0;
  double mean_cd = 0;
  double mean_h_err = 0;
  double mean_w_err = 0;
  double mean_ar_err = 0;
  std::vector<BucketStats> buckets;
};

struct MetricReport {
  std::vector<double> edges;
  std::vector<ModelMetrics> models;
};

/// Index of the bucket holding `distance` for the given edges: 0 below the
/// first edge, i for [e[i-1], e[i]) with the last interior bucket closed on
/// the right, edges.size() above the last edge.
std::size_t bucket_of(double distance, const std::vector<double>& edges);

/// Aggregates precomputed predictions (parallel to `records`). Throws
/// ConfigError for empty input or non-increasing edges.
ModelMetrics evaluate_predictions(const std::string& name, std::span<const DetectionRecord> records,
                                  std::span<const std::optional<BBox>> predictions,
                                  const std::vector<double>& edges = default_bucket_edges());

using BatchPredictor =
    std::function<std::vector<std::optional<BBox>>(std::span<const DetectionRecord>)>;

ModelMetrics evaluate(const std::string& name, const BatchPredictor& predictor,
                      std::span<const DetectionRecord> records,
                      const std::vector<double>& edges = default_bucket_edges());

/// `model,count,excluded,iou,cd,hE,wE,arE`, one row per model.
std::string format_metrics_csv(const MetricReport& report);
/// `bucket_min_m,bucket_max_m,<model>...,n_<model>...`; empty cells for
/// empty buckets.
std::string format_iou_by_distance_csv(const MetricReport& report);
/// IoU-vs-distance chart as standalone SVG; empty buckets leave gaps.
std::string render_iou_chart_svg(const MetricReport& report);

/// Writes metrics.csv, iou_by_distance.csv and iou_by_distance.svg.
void emit_report(const MetricReport& report, const std::filesystem::path& dir);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

}  // namespace bevmap

#endif  // BEVMAP_EVAL_HPP
