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

#ifndef BEVMAP_DATASET_HPP
#define BEVMAP_DATASET_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bevmap/core_types.hpp"

namespace bevmap {

struct DatasetHeader {
  FrameDims frontal_dims;
  FrameDims birdeye_dims;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<DetectionRecord> records;
};

/// Problem found on one line of a dataset file. Line numbers are 1-based.
struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

/// Dataset as read from disk, plus optional per-record predictions (present
/// in predictions files) and any malformed lines that were skipped.
struct DatasetFile {
  Dataset dataset;
  std::vector<std::optional<BBox>> predictions;  // parallel to dataset.records
  std::vector<ParseIssue> issues;
};

// JSONL layout: one header object with "frontal_dims" and "birdeye_dims",
// then one object per record. Predictions files add "predicted_birdeye_box".

std::string format_header(const DatasetHeader& header);
std::string format_record(const DetectionRecord& r,
                          const std::optional<BBox>& prediction = std::nullopt,
                          bool with_prediction_field = false);
/// Throws ParseError on malformed input.
DetectionRecord parse_record(const std::string& line);

void write_dataset(std::ostream& out, const Dataset& data);
void write_predictions(std::ostream& out, const Dataset& data,
                       const std::vector<std::optional<BBox>>& predictions);

/// Malformed record lines are skipped and reported; a missing or malformed
/// header throws ParseError.
DatasetFile read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const Dataset& data);
void save_predictions(const std::filesystem::path& path, const Dataset& data,
                      const std::vector<std::optional<BBox>>& predictions);
DatasetFile load_dataset(const std::filesystem::path& path);

}  // namespace bevmap

#endif  // BEVMAP_DATASET_HPP
