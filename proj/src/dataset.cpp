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

#include "bevmap/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace bevmap {
namespace {

using json = nlohmann::ordered_json;

json box_to_json(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BBox box_from_json(const json& j, View view, const char* field) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError(std::string("field '") + field + "' must be an array of 4 numbers");
  BBox b{0, 0, 0, 0, Space::pixel, view};
  double* dst[] = {&b.x_min, &b.y_min, &b.x_max, &b.y_max};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number()) throw ParseError(std::string("field '") + field + "' has a non-number");
    *dst[i] = j[i].get<double>();
  }
  if (!b.is_ordered()) throw ParseError(std::string("field '") + field + "' has inverted corners");
  return b;
}

FrameDims dims_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw ParseError(std::string("header field '") + field + "' must be [width, height]");
  FrameDims d{j[0].get<int>(), j[1].get<int>()};
  if (d.width <= 0 || d.height <= 0)
    throw ParseError(std::string("header field '") + field + "' must be positive");
  return d;
}

template <typename T>
T require(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw ParseError(std::string("missing field '") + field + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + field + "' has the wrong type");
  }
}

json record_to_json(const DetectionRecord& r) {
  json j = json::object();
  j["frame_id"] = r.frame_id;
  j["entity_id"] = r.entity_id;
  j["model_id"] = r.model_id;
  j["class_label"] = std::string(to_string(r.class_label));
  j["frontal_box"] = box_to_json(r.frontal_box);
  j["birdeye_box"] = box_to_json(r.birdeye_box);
  j["distance_m"] = r.distance_m;
  j["yaw_deg"] = r.yaw_deg;
  return j;
}

}  // namespace

std::string format_header(const DatasetHeader& header) {
  json j;
  j["frontal_dims"] = {header.frontal_dims.width, header.frontal_dims.height};
  j["birdeye_dims"] = {header.birdeye_dims.width, header.birdeye_dims.height};
  return j.dump();
}

std::string format_record(const DetectionRecord& r, const std::optional<BBox>& prediction,
                          bool with_prediction_field) {
  json j = record_to_json(r);
  if (with_prediction_field)
    j["predicted_birdeye_box"] = prediction ? box_to_json(*prediction) : json(nullptr);
  return j.dump();
}

namespace {

json parse_object(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  return j;
}

DetectionRecord record_from_json(const json& j) {
  DetectionRecord r;
  r.frame_id = require<std::string>(j, "frame_id");
  r.entity_id = require<std::int64_t>(j, "entity_id");
  r.model_id = require<std::int64_t>(j, "model_id");
  r.class_label = parse_class_label(require<std::string>(j, "class_label"));
  if (!j.contains("frontal_box")) throw ParseError("missing field 'frontal_box'");
  if (!j.contains("birdeye_box")) throw ParseError("missing field 'birdeye_box'");
  r.frontal_box = box_from_json(j["frontal_box"], View::frontal, "frontal_box");
  r.birdeye_box = box_from_json(j["birdeye_box"], View::birdeye, "birdeye_box");
  r.distance_m = require<double>(j, "distance_m");
  r.yaw_deg = require<double>(j, "yaw_deg");
  if (!(r.distance_m >= 0)) throw ParseError("field 'distance_m' must be non-negative");
  return r;
}

}  // namespace

DetectionRecord parse_record(const std::string& line) { return record_from_json(parse_object(line)); }

void write_dataset(std::ostream& out, const Dataset& data) {
  out << format_header(data.header) << '\n';
  for (const auto& r : data.records) out << format_record(r) << '\n';
}

void write_predictions(std::ostream& out, const Dataset& data,
                       const std::vector<std::optional<BBox>>& predictions) {
  if (predictions.size() != data.records.size())
    throw Error("write_predictions: one prediction slot per record is required");
  out << format_header(data.header) << '\n';
  for (std::size_t i = 0; i < data.records.size(); ++i)
    out << format_record(data.records[i], predictions[i], true) << '\n';
}

DatasetFile read_dataset(std::istream& in) {
  DatasetFile file;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!have_header) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError("line " + std::to_string(line_no) + ": invalid header: " + e.what());
      }
      if (!j.is_object() || !j.contains("frontal_dims") || !j.contains("birdeye_dims"))
        throw ParseError("line " + std::to_string(line_no) +
                         ": header must carry 'frontal_dims' and 'birdeye_dims'");
      file.dataset.header.frontal_dims = dims_from_json(j["frontal_dims"], "frontal_dims");
      file.dataset.header.birdeye_dims = dims_from_json(j["birdeye_dims"], "birdeye_dims");
      have_header = true;
      continue;
    }
    try {
      json j = parse_object(line);
      DetectionRecord r = record_from_json(j);
      std::optional<BBox> prediction;
      if (auto it = j.find("predicted_birdeye_box"); it != j.end() && !it->is_null())
        prediction = box_from_json(*it, View::birdeye, "predicted_birdeye_box");
      file.dataset.records.push_back(std::move(r));
      file.predictions.push_back(prediction);
    } catch (const Error& e) {
      file.issues.push_back({line_no, e.what()});
    }
  }
  if (!have_header) throw ParseError("dataset has no header line");
  return file;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_dataset(out, data);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void save_predictions(const std::filesystem::path& path, const Dataset& data,
                      const std::vector<std::optional<BBox>>& predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_predictions(out, data, predictions);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

DatasetFile load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return read_dataset(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace bevmap
