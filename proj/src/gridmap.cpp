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

#include "bevmap/gridmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace bevmap {

void validate(const GridSpec& spec) {
  if (spec.cell_px <= 0) throw ConfigError("grid: cell_px must be positive");
  validate(spec.frontal);
  validate(spec.birdeye);
}

Cell cell_of(const Eigen::Vector2d& p, const GridSpec& spec, View view) {
  const FrameDims& d = spec.dims(view);
  if (!(p.x() >= 0 && p.y() >= 0 && p.x() <= d.width && p.y() <= d.height))
    throw OutOfRangeError("cell_of: point (" + std::to_string(p.x()) + ", " +
                          std::to_string(p.y()) + ") outside the " + std::string(to_string(view)) +
                          " frame");
  const int row = std::min(int(std::floor(p.y() / spec.cell_px)), spec.rows(view) - 1);
  const int col = std::min(int(std::floor(p.x() / spec.cell_px)), spec.cols(view) - 1);
  return {row, col};
}

int cell_index(const Cell& c, const GridSpec& spec, View view) {
  return c.row * spec.cols(view) + c.col;
}

Cell cell_at(int index, const GridSpec& spec, View view) {
  return {index / spec.cols(view), index % spec.cols(view)};
}

Eigen::Vector2d cell_center(const Cell& c, const GridSpec& spec, View view) {
  const FrameDims& d = spec.dims(view);
  const double x0 = double(c.col) * spec.cell_px, y0 = double(c.row) * spec.cell_px;
  const double w = std::min<double>(spec.cell_px, d.width - x0);
  const double h = std::min<double>(spec.cell_px, d.height - y0);
  return {x0 + 0.5 * w, y0 + 0.5 * h};
}

std::vector<std::pair<int, double>> GridModel::distribution(CornerRole role,
                                                            int frontal_cell) const {
  std::vector<std::pair<int, double>> out;
  auto it = table(role).find(frontal_cell);
  if (it == table(role).end()) return out;
  std::uint64_t total = 0;
  for (const auto& [cell, n] : it->second) total += n;
  for (const auto& [cell, n] : it->second) out.emplace_back(cell, double(n) / double(total));
  return out;
}

GridModel fit_grid(std::span<const DetectionRecord> records, const GridSpec& spec) {
  validate(spec);
  if (records.empty()) throw InsufficientDataError("fit_grid: empty training set");
  GridModel model;
  model.spec = spec;
  for (const auto& r : records) {
    int ftl, fbr, btl, bbr;
    try {
      ftl = cell_index(cell_of(r.frontal_box.top_left(), spec, View::frontal), spec, View::frontal);
      fbr = cell_index(cell_of(r.frontal_box.bottom_right(), spec, View::frontal), spec,
                       View::frontal);
      btl = cell_index(cell_of(r.birdeye_box.top_left(), spec, View::birdeye), spec, View::birdeye);
      bbr = cell_index(cell_of(r.birdeye_box.bottom_right(), spec, View::birdeye), spec,
                       View::birdeye);
    } catch (const OutOfRangeError&) {
      ++model.skipped_records;
      continue;
    }
    ++model.table(CornerRole::top_left)[ftl][btl];
    ++model.table(CornerRole::bottom_right)[fbr][bbr];
    ++model.observations;
  }
  return model;
}

int resolve_frontal_cell(const GridModel& model, CornerRole role, int frontal_cell) {
  const CellCounts& table = model.table(role);
  if (table.empty()) throw Error("grid model has no observations");
  if (table.contains(frontal_cell)) return frontal_cell;
  const Cell q = cell_at(frontal_cell, model.spec, View::frontal);
  int best = -1;
  long best_d2 = std::numeric_limits<long>::max();
  // Map iteration is in increasing index order, so strict < keeps the lowest.
  for (const auto& [index, counts] : table) {
    const Cell c = cell_at(index, model.spec, View::frontal);
    const long dr = c.row - q.row, dc = c.col - q.col;
    const long d2 = dr * dr + dc * dc;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = index;
    }
  }
  return best;
}

int argmax_cell(const GridModel& model, CornerRole role, int frontal_cell) {
  const auto& counts = model.table(role).at(resolve_frontal_cell(model, role, frontal_cell));
  int best = -1;
  std::uint64_t best_n = 0;
  for (const auto& [cell, n] : counts)
    if (n > best_n) {
      best_n = n;
      best = cell;
    }
  return best;
}

int sample_cell(const GridModel& model, CornerRole role, int frontal_cell, std::mt19937_64& rng) {
  const auto& counts = model.table(role).at(resolve_frontal_cell(model, role, frontal_cell));
  std::uint64_t total = 0;
  for (const auto& [cell, n] : counts) total += n;
  std::uniform_int_distribution<std::uint64_t> draw(0, total - 1);
  std::uint64_t k = draw(rng);
  for (const auto& [cell, n] : counts) {
    if (k < n) return cell;
    k -= n;
  }
  return counts.rbegin()->first;
}

namespace {

template <typename PickCell>
BBox predict_with(const GridModel& model, const BBox& frontal_box, PickCell pick) {
  const GridSpec& spec = model.spec;
  const int ftl = cell_index(cell_of(frontal_box.top_left(), spec, View::frontal), spec, View::frontal);
  const int fbr =
      cell_index(cell_of(frontal_box.bottom_right(), spec, View::frontal), spec, View::frontal);
  const int btl = pick(CornerRole::top_left, ftl);
  const int bbr = pick(CornerRole::bottom_right, fbr);
  const Eigen::Vector2d tl = cell_center(cell_at(btl, spec, View::birdeye), spec, View::birdeye);
  const Eigen::Vector2d br = cell_center(cell_at(bbr, spec, View::birdeye), spec, View::birdeye);
  return BBox{tl.x(), tl.y(), br.x(), br.y(), Space::pixel, View::birdeye}.ordered();
}

}  // namespace

BBox grid_predict(const GridModel& model, const BBox& frontal_box) {
  return predict_with(model, frontal_box,
                      [&](CornerRole role, int cell) { return argmax_cell(model, role, cell); });
}

BBox grid_predict(const GridModel& model, const BBox& frontal_box, std::mt19937_64& rng) {
  return predict_with(model, frontal_box, [&](CornerRole role, int cell) {
    return sample_cell(model, role, cell, rng);
  });
}

void write_grid(std::ostream& out, const GridModel& model) {
  const GridSpec& s = model.spec;
  out << kGridMagic << '\n';
  out << "cell_px,frontal_width,frontal_height,birdeye_width,birdeye_height\n";
  out << s.cell_px << ',' << s.frontal.width << ',' << s.frontal.height << ',' << s.birdeye.width
      << ',' << s.birdeye.height << '\n';
  out << "role,frontal_cell,birdeye_cell,count\n";
  for (CornerRole role : {CornerRole::top_left, CornerRole::bottom_right}) {
    const char* name = role == CornerRole::top_left ? "tl" : "br";
    for (const auto& [f, counts] : model.table(role))
      for (const auto& [b, n] : counts) out << name << ',' << f << ',' << b << ',' << n << '\n';
  }
}

GridModel read_grid(std::istream& in) {
  auto fail = [](const std::string& what) -> ParseError {
    return ParseError("grid model: " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != kGridMagic) throw fail("missing magic line");
  std::getline(in, line);  // spec column names
  GridModel model;
  GridSpec& s = model.spec;
  char c1, c2, c3, c4;
  if (!std::getline(in, line)) throw fail("missing spec row");
  std::istringstream spec_row(line);
  if (!(spec_row >> s.cell_px >> c1 >> s.frontal.width >> c2 >> s.frontal.height >> c3 >>
        s.birdeye.width >> c4 >> s.birdeye.height))
    throw fail("malformed spec row");
  validate(s);
  std::getline(in, line);  // table column names
  const int frontal_cells = s.rows(View::frontal) * s.cols(View::frontal);
  const int birdeye_cells = s.rows(View::birdeye) * s.cols(View::birdeye);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw fail("malformed row '" + line + "'");
    const std::string role = line.substr(0, comma);
    std::istringstream row(line.substr(comma + 1));
    long f, b;
    unsigned long long n;
    if (!(row >> f >> c1 >> b >> c2 >> n) || (role != "tl" && role != "br") || f < 0 ||
        f >= frontal_cells || b < 0 || b >= birdeye_cells || n == 0)
      throw fail("malformed row '" + line + "'");
    auto& table = model.table(role == "tl" ? CornerRole::top_left : CornerRole::bottom_right);
    table[int(f)][int(b)] += n;
    if (role == "tl") model.observations += n;
  }
  return model;
}

void save_grid(const std::filesystem::path& path, const GridModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_grid(out, model);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

GridModel load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return read_grid(in);
}

}  // namespace bevmap
