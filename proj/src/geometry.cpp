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

#include "bevmap/geometry.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace bevmap {

std::vector<Correspondence<double>> collect_correspondences(
    std::span<const DetectionRecord> records) {
  if (records.empty()) throw InsufficientDataError("collect_correspondences: empty dataset");
  std::vector<Correspondence<double>> out;
  out.reserve(2 * records.size());
  for (const auto& r : records) {
    out.push_back({r.frontal_box.bottom_left(), r.birdeye_box.bottom_left()});
    out.push_back({r.frontal_box.bottom_right(), r.birdeye_box.bottom_right()});
  }
  return out;
}

double mean_training_height(std::span<const DetectionRecord> records) {
  if (records.empty()) throw InsufficientDataError("mean_training_height: empty dataset");
  // Neumaier summation
  double sum = 0, comp = 0;
  for (const auto& r : records) {
    const double h = r.birdeye_box.height();
    const double t = sum + h;
    comp += std::abs(sum) >= std::abs(h) ? (sum - t) + h : (h - t) + sum;
    sum = t;
  }
  return (sum + comp) / double(records.size());
}

Homography fit_homography(std::span<const DetectionRecord> records) {
  Homography model;
  model.h = estimate_homography(collect_correspondences(records));
  model.avg_height_px = mean_training_height(records);
  return model;
}

BBox homography_predict(const Homography& model, const BBox& frontal_box) {
  const Eigen::Vector2d left = apply_homography(model.h, frontal_box.bottom_left());
  const Eigen::Vector2d right = apply_homography(model.h, frontal_box.bottom_right());
  const double bottom = 0.5 * (left.y() + right.y());
  return {std::min(left.x(), right.x()), bottom - model.avg_height_px,
          std::max(left.x(), right.x()), bottom, Space::pixel, View::birdeye};
}

std::string format_homography(const Homography& model) {
  nlohmann::ordered_json j;
  j["kind"] = "homography";
  std::vector<double> h;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) h.push_back(model.h(r, c));
  j["h"] = h;
  j["avg_height_px"] = model.avg_height_px;
  return j.dump(2) + "\n";
}

Homography parse_homography(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("homography model: ") + e.what());
  }
  if (!j.is_object() || j.value("kind", "") != "homography" || !j.contains("h") ||
      !j["h"].is_array() || j["h"].size() != 9 || !j.contains("avg_height_px"))
    throw ParseError("homography model: expected kind, 9-entry h and avg_height_px");
  Homography model;
  try {
    for (int i = 0; i < 9; ++i) model.h(i / 3, i % 3) = j["h"][i].get<double>();
    model.avg_height_px = j["avg_height_px"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("homography model: ") + e.what());
  }
  return model;
}

void save_homography(const std::filesystem::path& path, const Homography& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << format_homography(model);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Homography load_homography(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_homography(ss.str());
}

}  // namespace bevmap
