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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "bevmap/datagen.hpp"
#include "bevmap/errors.hpp"
#include "bevmap/gridmap.hpp"
#include "test_util.hpp"

namespace bevmap {
namespace {

const GridSpec kSpec{10, {1920, 1080}, {1920, 1080}};

DetectionRecord record_with(BBox frontal, BBox birdeye) {
  DetectionRecord r;
  r.frontal_box = frontal;
  r.birdeye_box = birdeye;
  return r;
}

BBox fbox(double a, double b, double c, double d) { return {a, b, c, d, Space::pixel, View::frontal}; }
BBox bbox(double a, double b, double c, double d) { return {a, b, c, d, Space::pixel, View::birdeye}; }

int fidx(double x, double y) { return cell_index(cell_of({x, y}, kSpec, View::frontal), kSpec, View::frontal); }
int bidx(double x, double y) { return cell_index(cell_of({x, y}, kSpec, View::birdeye), kSpec, View::birdeye); }

TEST(GridSpec, DefaultResolution) {
  EXPECT_EQ(kSpec.rows(View::frontal), 108);
  EXPECT_EQ(kSpec.cols(View::frontal), 192);
  const GridSpec odd{7, {100, 50}, {30, 30}};
  EXPECT_EQ(odd.rows(View::frontal), 8);   // last row clipped
  EXPECT_EQ(odd.cols(View::frontal), 15);
  EXPECT_THROW(validate(GridSpec{0, {}, {}}), ConfigError);
}

TEST(CellOf, Examples) {
  EXPECT_EQ(cell_of({0, 0}, kSpec, View::frontal), (Cell{0, 0}));
  EXPECT_EQ(cell_of({1919, 1079}, kSpec, View::frontal), (Cell{107, 191}));
  EXPECT_EQ(cell_of({25, 13}, kSpec, View::frontal), (Cell{1, 2}));
  EXPECT_EQ(cell_of({1920, 1080}, kSpec, View::frontal), (Cell{107, 191}));  // frame edge clips
  EXPECT_THROW(cell_of({-0.5, 3}, kSpec, View::frontal), OutOfRangeError);
  EXPECT_THROW(cell_of({3, 1080.5}, kSpec, View::frontal), OutOfRangeError);
}

TEST(CellOf, SurjectiveOnDenseInput) {
  const GridSpec small{10, {200, 100}, {200, 100}};
  std::set<int> seen;
  for (double y = 0.5; y < 100; y += 1)
    for (double x = 0.5; x < 200; x += 1)
      seen.insert(cell_index(cell_of({x, y}, small, View::frontal), small, View::frontal));
  EXPECT_EQ(seen.size(), 200u);
}

TEST(CellIndex, RoundTrip) {
  for (int i : {0, 1, 191, 192, 20735}) EXPECT_EQ(cell_index(cell_at(i, kSpec, View::frontal), kSpec, View::frontal), i);
  EXPECT_TRUE(cell_center({1, 2}, kSpec, View::birdeye).isApprox(Eigen::Vector2d(25, 15)));
}

TEST(FitGrid, SingleRecordGivesDeltas) {
  const std::vector<DetectionRecord> recs{record_with(fbox(25, 13, 80, 60), bbox(300, 200, 340, 270))};
  const GridModel m = fit_grid(recs, kSpec);
  EXPECT_EQ(m.observations, 1u);
  for (auto role : {CornerRole::top_left, CornerRole::bottom_right}) {
    ASSERT_EQ(m.table(role).size(), 1u);
    EXPECT_EQ(m.table(role).begin()->second.size(), 1u);
  }
  const auto d = m.distribution(CornerRole::top_left, fidx(25, 13));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].first, bidx(300, 200));
  EXPECT_DOUBLE_EQ(d[0].second, 1.0);
  std::mt19937_64 rng(1);
  const BBox expected = bbox(305, 205, 345, 275);
  EXPECT_EQ(grid_predict(m, recs[0].frontal_box), expected);
  EXPECT_EQ(grid_predict(m, recs[0].frontal_box, rng), expected);
}

TEST(FitGrid, TwoWaySplit) {
  const std::vector<DetectionRecord> recs{
      record_with(fbox(21, 31, 80, 60), bbox(300, 200, 340, 270)),
      record_with(fbox(22, 32, 90, 70), bbox(500, 200, 540, 270))};
  const auto d = fit_grid(recs, kSpec).distribution(CornerRole::top_left, fidx(21, 31));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d[0].second, 0.5);
  EXPECT_DOUBLE_EQ(d[1].second, 0.5);
}

struct PairHash {
  std::size_t operator()(const std::pair<int, int>& p) const {
    return std::hash<long long>()((static_cast<long long>(p.first) << 32) ^ p.second);
  }
};

TEST(FitGrid, CountsMatchTallyOracle) {
  SceneConfig cfg;
  cfg.rng_seed = 5;
  cfg.noise.box_jitter_px = 2;
  std::vector<DetectionRecord> recs;
  for (int frame = 0; recs.size() < 10000; ++frame)
    for (const auto& r : generate_frame(cfg, frame).records)
      if (recs.size() < 10000) recs.push_back(r);
  const GridModel m = fit_grid(recs, kSpec);
  // Independent tally: plain floor division with clipping, hashed pair keys.
  auto cell = [](double x, double y, const FrameDims& dims) {
    const int col = std::min(static_cast<int>(std::floor(x / 10)), (dims.width + 9) / 10 - 1);
    const int row = std::min(static_cast<int>(std::floor(y / 10)), (dims.height + 9) / 10 - 1);
    return row * ((dims.width + 9) / 10) + col;
  };
  std::unordered_map<std::pair<int, int>, std::uint64_t, PairHash> tl, br;
  for (const auto& r : recs) {
    ++tl[{cell(r.frontal_box.x_min, r.frontal_box.y_min, kSpec.frontal),
          cell(r.birdeye_box.x_min, r.birdeye_box.y_min, kSpec.birdeye)}];
    ++br[{cell(r.frontal_box.x_max, r.frontal_box.y_max, kSpec.frontal),
          cell(r.birdeye_box.x_max, r.birdeye_box.y_max, kSpec.birdeye)}];
  }
  auto check = [](const CellCounts& table, const auto& oracle) {
    std::size_t entries = 0;
    for (const auto& [f, row] : table)
      for (const auto& [b, count] : row) {
        ++entries;
        const auto it = oracle.find({f, b});
        ASSERT_NE(it, oracle.end());
        EXPECT_EQ(it->second, count);
      }
    EXPECT_EQ(entries, oracle.size());
  };
  check(m.table(CornerRole::top_left), tl);
  check(m.table(CornerRole::bottom_right), br);
  EXPECT_EQ(m.observations, 10000u);
  EXPECT_EQ(m.skipped_records, 0u);
}

TEST(FitGrid, ProbabilitiesSumToOneAndPermutationInvariant) {
  std::mt19937_64 rng(3);
  std::vector<DetectionRecord> recs;
  for (int i = 0; i < 3000; ++i) recs.push_back(testing::random_record(rng, i));
  const GridModel a = fit_grid(recs, kSpec);
  std::shuffle(recs.begin(), recs.end(), rng);
  const GridModel b = fit_grid(recs, kSpec);
  EXPECT_EQ(a.tables, b.tables);
  for (auto role : {CornerRole::top_left, CornerRole::bottom_right})
    for (const auto& [f, row] : a.table(role)) {
      double sum = 0;
      for (const auto& [cell, p] : a.distribution(role, f)) sum += p;
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(FitGrid, SkipsOutOfFrameRecords) {
  const std::vector<DetectionRecord> recs{record_with(fbox(-5, 0, 10, 10), bbox(0, 0, 1, 1)),
                                          record_with(fbox(0, 0, 10, 10), bbox(0, 0, 1, 1))};
  const GridModel m = fit_grid(recs, kSpec);
  EXPECT_EQ(m.skipped_records, 1u);
  EXPECT_EQ(m.observations, 1u);
  EXPECT_THROW(fit_grid(std::vector<DetectionRecord>{}, kSpec), InsufficientDataError);
}

GridModel ninety_ten() {
  std::vector<DetectionRecord> recs;
  for (int i = 0; i < 10; ++i)
    recs.push_back(record_with(fbox(101, 101, 150, 150),
                               i < 9 ? bbox(400, 300, 450, 350) : bbox(600, 300, 650, 350)));
  return fit_grid(recs, kSpec);
}

TEST(Predict, ArgmaxPicksMode) {
  const GridModel m = ninety_ten();
  EXPECT_EQ(argmax_cell(m, CornerRole::top_left, fidx(101, 101)), bidx(400, 300));
  const BBox b = grid_predict(m, fbox(101, 101, 150, 150));
  EXPECT_DOUBLE_EQ(b.x_min, 405);
  EXPECT_DOUBLE_EQ(b.y_min, 305);
}

TEST(Predict, SampleFrequencyWithinBinomialBand) {
  const GridModel m = ninety_ten();
  std::mt19937_64 rng(2024);
  const int n = 100000, a = bidx(400, 300);
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += sample_cell(m, CornerRole::top_left, fidx(101, 101), rng) == a;
  const double freq = static_cast<double>(hits) / n;
  EXPECT_GE(freq, 0.894);
  EXPECT_LE(freq, 0.906);
}

TEST(Predict, ArgmaxTieBreaksToLowestCell) {
  std::vector<DetectionRecord> recs{record_with(fbox(5, 5, 9, 9), bbox(600, 300, 610, 310)),
                                    record_with(fbox(5, 5, 9, 9), bbox(400, 300, 410, 310))};
  const GridModel m = fit_grid(recs, kSpec);
  EXPECT_EQ(argmax_cell(m, CornerRole::top_left, fidx(5, 5)), bidx(400, 300));
}

TEST(Predict, UnseenCellUsesNearestObserved) {
  std::vector<DetectionRecord> recs{record_with(fbox(5, 5, 9, 9), bbox(100, 100, 110, 110)),
                                    record_with(fbox(105, 105, 109, 109), bbox(500, 500, 510, 510))};
  const GridModel m = fit_grid(recs, kSpec);
  EXPECT_EQ(resolve_frontal_cell(m, CornerRole::top_left, fidx(85, 95)), fidx(105, 105));
  // Equidistant from (0, 0) and (10, 10): lowest index wins.
  EXPECT_EQ(resolve_frontal_cell(m, CornerRole::top_left, fidx(55, 55)), fidx(5, 5));
  EXPECT_EQ(resolve_frontal_cell(m, CornerRole::top_left, fidx(5, 5)), fidx(5, 5));
}

TEST(Predict, EmptyModelThrows) {
  const GridModel empty{kSpec, {}, 0, 0};
  EXPECT_THROW(grid_predict(empty, fbox(0, 0, 5, 5)), Error);
}

TEST(Predict, OutputsAreOrderedAndDeterministic) {
  std::mt19937_64 rng(8);
  std::vector<DetectionRecord> recs;
  for (int i = 0; i < 500; ++i) recs.push_back(testing::random_record(rng, i));
  const GridModel m = fit_grid(recs, kSpec);
  std::mt19937_64 s(9);
  for (int i = 0; i < 500; ++i) {
    const BBox f = testing::random_box(rng, kSpec.frontal, View::frontal);
    const BBox a = grid_predict(m, f);
    EXPECT_TRUE(a.is_ordered());
    EXPECT_EQ(a, grid_predict(m, f));
    EXPECT_TRUE(grid_predict(m, f, s).is_ordered());
  }
}

TEST(Persist, RoundTrip) {
  std::mt19937_64 rng(10);
  std::vector<DetectionRecord> recs;
  for (int i = 0; i < 200; ++i) recs.push_back(testing::random_record(rng, i));
  const GridSpec spec{12, {1920, 1080}, {800, 600}};
  for (auto& r : recs) r.birdeye_box = testing::random_box(rng, spec.birdeye, View::birdeye);
  const GridModel m = fit_grid(recs, spec);
  std::stringstream io;
  write_grid(io, m);
  const GridModel back = read_grid(io);
  EXPECT_EQ(back.tables, m.tables);
  EXPECT_EQ(back.spec.cell_px, 12);
  EXPECT_EQ(back.spec.birdeye, spec.birdeye);
  EXPECT_EQ(back.observations, m.observations);
  std::istringstream bad("# not a grid\n");
  EXPECT_THROW(read_grid(bad), ParseError);
}

}  // namespace
}  // namespace bevmap
