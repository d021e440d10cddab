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

#ifndef BEVMAP_GRIDMAP_HPP
#define BEVMAP_GRIDMAP_HPP

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "bevmap/core_types.hpp"

namespace bevmap {

/// Square cells of cell_px pixels over both frames; a partial last row or
/// column is kept (clipped).
struct GridSpec {
  int cell_px = 10;
  FrameDims frontal;
  FrameDims birdeye;

  const FrameDims& dims(View v) const { return v == View::frontal ? frontal : birdeye; }
  int rows(View v) const { return (dims(v).height + cell_px - 1) / cell_px; }
  int cols(View v) const { return (dims(v).width + cell_px - 1) / cell_px; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

void validate(const GridSpec& spec);

struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// (floor(y / cell), floor(x / cell)) clipped to the grid. Throws
/// OutOfRangeError for points outside [0, width] x [0, height].
Cell cell_of(const Eigen::Vector2d& p, const GridSpec& spec, View view);

int cell_index(const Cell& c, const GridSpec& spec, View view);
Cell cell_at(int index, const GridSpec& spec, View view);

/// Center pixel of a (possibly clipped) cell.
Eigen::Vector2d cell_center(const Cell& c, const GridSpec& spec, View view);

enum class CornerRole { top_left = 0, bottom_right = 1 };

/// Sparse count table: frontal cell index -> (bird's-eye cell index -> count).
using CellCounts = std::map<int, std::map<int, std::uint64_t>>;

struct GridModel {
  GridSpec spec;
  std::array<CellCounts, 2> tables;  // indexed by CornerRole
  std::uint64_t observations = 0;
  std::size_t skipped_records = 0;

  const CellCounts& table(CornerRole role) const { return tables[static_cast<int>(role)]; }
  CellCounts& table(CornerRole role) { return tables[static_cast<int>(role)]; }

  /// Normalized distribution of a frontal cell, ordered by bird's-eye cell
  /// index. Empty when the cell was never observed.
  std::vector<std::pair<int, double>> distribution(CornerRole role, int frontal_cell) const;

  friend bool operator==(const GridModel& a, const GridModel& b) {
    return a.spec == b.spec && a.tables == b.tables && a.observations == b.observations;
  }
};

/// Records whose corners fall outside either frame are skipped and counted.
GridModel fit_grid(std::span<const DetectionRecord> records, const GridSpec& spec);

/// Observed frontal cell used for a query cell: the cell itself when seen
/// during training, otherwise the nearest observed cell (Euclidean distance
/// on (row, col), ties to the lowest index). Throws Error on an empty model.
int resolve_frontal_cell(const GridModel& model, CornerRole role, int frontal_cell);

/// Highest-count bird's-eye cell, ties to the lowest index.
int argmax_cell(const GridModel& model, CornerRole role, int frontal_cell);

/// Draws a bird's-eye cell proportionally to the counts.
int sample_cell(const GridModel& model, CornerRole role, int frontal_cell, std::mt19937_64& rng);

/// Argmax prediction: corners mapped to the centers of the modal cells,
/// swapped if inverted.
BBox grid_predict(const GridModel& model, const BBox& frontal_box);
/// Sampling prediction.
BBox grid_predict(const GridModel& model, const BBox& frontal_box, std::mt19937_64& rng);

/// Sparse CSV: a spec header, then `role,frontal_cell,birdeye_cell,count`.
void write_grid(std::ostream& out, const GridModel& model);
GridModel read_grid(std::istream& in);
void save_grid(const std::filesystem::path& path, const GridModel& model);
GridModel load_grid(const std::filesystem::path& path);

inline constexpr const char* kGridMagic = "# bevmap grid v1";

}  // namespace bevmap

#endif  // BEVMAP_GRIDMAP_HPP
