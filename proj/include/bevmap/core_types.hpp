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

#ifndef BEVMAP_CORE_TYPES_HPP
#define BEVMAP_CORE_TYPES_HPP

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "bevmap/errors.hpp"

namespace bevmap {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;

enum class View { frontal, birdeye };
enum class Space { pixel, normalized };
enum class ClassLabel { car, truck, bus, van, motorbike };

inline constexpr std::array<ClassLabel, 5> kAllClasses = {
    ClassLabel::car, ClassLabel::truck, ClassLabel::bus, ClassLabel::van, ClassLabel::motorbike};

std::string_view to_string(ClassLabel label);
std::string_view to_string(View view);
/// Throws ParseError on an unknown label.
ClassLabel parse_class_label(std::string_view text);

struct FrameDims {
  int width = 1920;
  int height = 1080;

  friend bool operator==(const FrameDims&, const FrameDims&) = default;
};

/// Throws ConfigError unless both extents are positive.
void validate(const FrameDims& dims);

/// Axis-aligned box stored as a corner pair. The y axis grows downward in
/// both views.
template <typename Scalar>
struct BasicBBox {
  Scalar x_min{};
  Scalar y_min{};
  Scalar x_max{};
  Scalar y_max{};
  Space space = Space::pixel;
  View view = View::frontal;

  Scalar width() const { return x_max - x_min; }
  Scalar height() const { return y_max - y_min; }
  Scalar area() const { return width() * height(); }
  Vector2<Scalar> center() const {
    return {(x_min + x_max) / Scalar(2), (y_min + y_max) / Scalar(2)};
  }
  Vector2<Scalar> top_left() const { return {x_min, y_min}; }
  Vector2<Scalar> bottom_right() const { return {x_max, y_max}; }
  Vector2<Scalar> bottom_left() const { return {x_min, y_max}; }

  Vector4<Scalar> coords() const { return {x_min, y_min, x_max, y_max}; }

  static BasicBBox from_coords(const Vector4<Scalar>& c, Space space, View view) {
    return {c(0), c(1), c(2), c(3), space, view};
  }

  bool is_ordered() const { return x_min <= x_max && y_min <= y_max; }

  /// Swaps inverted corners so the ordering invariant holds.
  BasicBBox ordered() const {
    BasicBBox b = *this;
    if (b.x_min > b.x_max) std::swap(b.x_min, b.x_max);
    if (b.y_min > b.y_max) std::swap(b.y_min, b.y_max);
    return b;
  }

  template <typename Other>
  BasicBBox<Other> cast() const {
    return {Other(x_min), Other(y_min), Other(x_max), Other(y_max), space, view};
  }

  friend bool operator==(const BasicBBox&, const BasicBBox&) = default;
};

using BBox = BasicBBox<double>;

/// True when the box lies inside [0, width] x [0, height].
template <typename Scalar>
bool inside_frame(const BasicBBox<Scalar>& b, const FrameDims& dims) {
  return b.x_min >= 0 && b.y_min >= 0 && b.x_max <= dims.width && b.y_max <= dims.height;
}

/// Maps pixel coordinates to [-1, 1]: c -> 2 c / extent - 1.
template <typename Scalar>
BasicBBox<Scalar> normalize_bbox(const BasicBBox<Scalar>& b, const FrameDims& dims) {
  if (b.space != Space::pixel) throw Error("normalize_bbox: box is already normalized");
  if (!inside_frame(b, dims) || !b.is_ordered())
    throw OutOfRangeError("normalize_bbox: box (" + std::to_string(double(b.x_min)) + ", " +
                          std::to_string(double(b.y_min)) + ", " + std::to_string(double(b.x_max)) +
                          ", " + std::to_string(double(b.y_max)) + ") is outside the " +
                          std::to_string(dims.width) + "x" + std::to_string(dims.height) + " frame");
  const Scalar w(dims.width), h(dims.height);
  return {Scalar(2) * b.x_min / w - Scalar(1), Scalar(2) * b.y_min / h - Scalar(1),
          Scalar(2) * b.x_max / w - Scalar(1), Scalar(2) * b.y_max / h - Scalar(1),
          Space::normalized, b.view};
}

template <typename Scalar>
BasicBBox<Scalar> denormalize_bbox(const BasicBBox<Scalar>& b, const FrameDims& dims) {
  const Scalar w(dims.width), h(dims.height);
  return {(b.x_min + Scalar(1)) * w / Scalar(2), (b.y_min + Scalar(1)) * h / Scalar(2),
          (b.x_max + Scalar(1)) * w / Scalar(2), (b.y_max + Scalar(1)) * h / Scalar(2),
          Space::pixel, b.view};
}

/// Throws OutOfRangeError when a box breaks the corner-ordering or
/// normalized-range invariants.
void validate(const BBox& b);

/// One entity observed in both the frontal and the bird's-eye view.
struct DetectionRecord {
  std::string frame_id;
  std::int64_t entity_id = 0;
  std::int64_t model_id = 0;
  ClassLabel class_label = ClassLabel::car;
  BBox frontal_box{0, 0, 0, 0, Space::pixel, View::frontal};
  BBox birdeye_box{0, 0, 0, 0, Space::pixel, View::birdeye};
  double distance_m = 0;
  double yaw_deg = 0;

  /// Stable identifier "<frame_id>/<entity_id>", used to key feature files.
  std::string key() const { return frame_id + "/" + std::to_string(entity_id); }

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

void validate(const DetectionRecord& r);

}  // namespace bevmap

#endif  // BEVMAP_CORE_TYPES_HPP
