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

#include "bevmap/core_types.hpp"

namespace bevmap {

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::car: return "car";
    case ClassLabel::truck: return "truck";
    case ClassLabel::bus: return "bus";
    case ClassLabel::van: return "van";
    case ClassLabel::motorbike: return "motorbike";
  }
  return "car";
}

std::string_view to_string(View view) { return view == View::frontal ? "frontal" : "birdeye"; }

ClassLabel parse_class_label(std::string_view text) {
  for (ClassLabel c : kAllClasses)
    if (to_string(c) == text) return c;
  throw ParseError("unknown class label '" + std::string(text) + "'");
}

void validate(const FrameDims& dims) {
  if (dims.width <= 0 || dims.height <= 0)
    throw ConfigError("frame dimensions must be positive, got " + std::to_string(dims.width) +
                      "x" + std::to_string(dims.height));
}

void validate(const BBox& b) {
  if (!b.is_ordered()) throw OutOfRangeError("box corners are inverted");
  if (b.space == Space::normalized) {
    for (double c : {b.x_min, b.y_min, b.x_max, b.y_max})
      if (c < -1.0 || c > 1.0) throw OutOfRangeError("normalized box coordinate outside [-1, 1]");
  }
}

void validate(const DetectionRecord& r) {
  if (r.frontal_box.view != View::frontal) throw Error("frontal_box must carry the frontal view");
  if (r.birdeye_box.view != View::birdeye) throw Error("birdeye_box must carry the birdeye view");
  if (!(r.distance_m >= 0)) throw OutOfRangeError("distance_m must be non-negative");
  validate(r.frontal_box);
  validate(r.birdeye_box);
}

}  // namespace bevmap
