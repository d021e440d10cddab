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
#include <random>
#include <set>
#include <sstream>

#include "bevmap/datagen.hpp"
#include "bevmap/errors.hpp"
#include "bevmap/filter.hpp"
#include "test_util.hpp"

namespace bevmap {
namespace {

const DatasetHeader kHeader{};

DetectionRecord plain_record() {
  DetectionRecord r;
  r.frame_id = "f";
  r.model_id = 3;
  r.frontal_box = {100, 100, 200, 180, Space::pixel, View::frontal};
  r.birdeye_box = {900, 400, 930, 460, Space::pixel, View::birdeye};
  r.distance_m = 12;
  r.yaw_deg = 10;
  return r;
}

RuleSet typical_rules() {
  RuleSet rules;
  rules.distance_m = {5.0, 30.0};
  rules.box_in_frame = true;
  return rules;
}

std::set<std::string> keys(const std::vector<DetectionRecord>& rs) {
  std::set<std::string> out;
  for (const auto& r : rs) out.insert(r.key());
  return out;
}

TEST(Discriminate, AllRulesPass) { EXPECT_TRUE(discriminate(plain_record(), typical_rules(), kHeader)); }

TEST(Discriminate, DistanceViolation) {
  auto r = plain_record();
  r.distance_m = 200;
  EXPECT_FALSE(discriminate(r, typical_rules(), kHeader));
  EXPECT_EQ(first_failing_rule(r, typical_rules(), kHeader), Rule::distance);
}

TEST(Discriminate, ContainmentViolation) {
  auto r = plain_record();
  r.frontal_box.x_max = 1925;
  EXPECT_FALSE(discriminate(r, typical_rules(), kHeader));
  EXPECT_EQ(first_failing_rule(r, typical_rules(), kHeader), Rule::containment);
  RuleSet loose;
  EXPECT_TRUE(discriminate(r, loose, kHeader));
}

TEST(Discriminate, EachRuleFires) {
  const auto r = plain_record();
  RuleSet area;
  area.min_frontal_area = 8001;
  EXPECT_EQ(first_failing_rule(r, area, kHeader), Rule::area);
  RuleSet aspect;
  aspect.birdeye_aspect = {std::nullopt, 0.4};  // 30 / 60 = 0.5
  EXPECT_EQ(first_failing_rule(r, aspect, kHeader), Rule::aspect);
  RuleSet model;
  model.model_denylist = {3};
  EXPECT_EQ(first_failing_rule(r, model, kHeader), Rule::model);
  RuleSet allow;
  allow.model_allowlist = {4};
  EXPECT_EQ(first_failing_rule(r, allow, kHeader), Rule::model);
  RuleSet cls;
  cls.class_allowlist = {ClassLabel::bus};
  EXPECT_EQ(first_failing_rule(r, cls, kHeader), Rule::class_label);
  RuleSet yaw;
  yaw.yaw_valid = true;
  auto bad = r;
  bad.yaw_deg = 360;
  EXPECT_EQ(first_failing_rule(bad, yaw, kHeader), Rule::yaw);
  EXPECT_FALSE(first_failing_rule(r, yaw, kHeader));
}

TEST(Discriminate, AttributionFollowsFixedOrder) {
  auto r = plain_record();
  r.distance_m = 100;
  r.yaw_deg = -5;
  RuleSet rules = typical_rules();
  rules.yaw_valid = true;
  rules.class_allowlist = {ClassLabel::bus};
  EXPECT_EQ(first_failing_rule(r, rules, kHeader), Rule::distance);
}

TEST(RuleSet, InvertedBoundsRejected) {
  RuleSet rules;
  rules.distance_m = {30.0, 5.0};
  EXPECT_THROW(validate(rules), ConfigError);
}

std::vector<DetectionRecord> random_records(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<DetectionRecord> out;
  std::uniform_real_distribution<double> spill(-40, 40), yaw(-20, 380), dist(0, 60);
  for (int i = 0; i < n; ++i) {
    auto r = testing::random_record(rng, i);
    r.frontal_box.x_max += std::max(0.0, spill(rng));
    r.distance_m = dist(rng);
    r.yaw_deg = yaw(rng);
    out.push_back(r);
  }
  return out;
}

TEST(FilterDataset, EmptyRulesetIsIdentity) {
  const auto recs = random_records(300, 1);
  const auto res = filter_dataset(recs, RuleSet{}, kHeader);
  EXPECT_EQ(res.kept, recs);
  EXPECT_EQ(res.report.rejected(), 0u);
}

TEST(FilterDataset, AnnihilatingRules) {
  const auto recs = random_records(300, 2);
  RuleSet rules;
  rules.distance_m = {1000.0, std::nullopt};
  const auto res = filter_dataset(recs, rules, kHeader);
  EXPECT_TRUE(res.kept.empty());
  EXPECT_EQ(res.report.rejected(), recs.size());
  EXPECT_EQ(res.report[Rule::distance], recs.size());
}

TEST(FilterDataset, MatchesBruteForceAndPartitionsInput) {
  const auto recs = random_records(2000, 3);
  RuleSet rules = typical_rules();
  rules.yaw_valid = true;
  rules.min_birdeye_area = 5000;
  const auto res = filter_dataset(recs, rules, kHeader);
  std::vector<DetectionRecord> expect_kept, expect_rejected;
  for (const auto& r : recs) (discriminate(r, rules, kHeader) ? expect_kept : expect_rejected).push_back(r);
  EXPECT_EQ(res.kept, expect_kept);
  EXPECT_EQ(res.rejected, expect_rejected);
  EXPECT_EQ(res.kept.size() + res.rejected.size(), recs.size());
  std::size_t tally = 0;
  for (auto c : res.report.counts) tally += c;
  EXPECT_EQ(tally, res.rejected.size());
}

TEST(FilterDataset, PermutationInvariant) {
  auto recs = random_records(1000, 4);
  const RuleSet rules = typical_rules();
  const auto a = keys(filter_dataset(recs, rules, kHeader).kept);
  std::shuffle(recs.begin(), recs.end(), std::mt19937_64(8));
  EXPECT_EQ(keys(filter_dataset(recs, rules, kHeader).kept), a);
}

/// Returns a copy of `rules` with one randomly chosen bound made stricter.
RuleSet tighten(RuleSet rules, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 8);
  std::uniform_real_distribution<double> u(0, 1);
  auto raise = [&](std::optional<double>& v, double scale) { v = v.value_or(0) + u(rng) * scale; };
  auto lower = [&](std::optional<double>& v, double scale) { v = v.value_or(scale) - u(rng) * scale / 4; };
  switch (pick(rng)) {
    case 0: raise(rules.distance_m.min, 10); break;
    case 1: lower(rules.distance_m.max, 60); break;
    case 2: rules.box_in_frame = true; break;
    case 3: raise(rules.min_frontal_area, 1e5); break;
    case 4: raise(rules.birdeye_aspect.min, 0.5); break;
    case 5: lower(rules.frontal_aspect.max, 8); break;
    case 6: rules.model_denylist.insert(100 * (rng() % 5) + rng() % 8); break;
    case 7:
      if (rules.class_allowlist.empty())
        rules.class_allowlist = {kAllClasses.begin(), kAllClasses.end()};
      rules.class_allowlist.erase(rules.class_allowlist.begin());
      break;
    default: rules.yaw_valid = true;
  }
  return rules;
}

TEST(FilterDataset, MonotoneUnderTightening) {
  const auto recs = random_records(1500, 5);
  std::mt19937_64 rng(77);
  RuleSet rules;
  auto kept = keys(filter_dataset(recs, rules, kHeader).kept);
  for (int step = 0; step < 100; ++step) {
    if (step % 25 == 0) rules = RuleSet{};
    const RuleSet stricter = tighten(rules, rng);
    if (step % 25 == 0) kept = keys(filter_dataset(recs, rules, kHeader).kept);
    const auto kept2 = keys(filter_dataset(recs, stricter, kHeader).kept);
    EXPECT_TRUE(std::includes(kept.begin(), kept.end(), kept2.begin(), kept2.end())) << "step " << step;
    rules = stricter;
    kept = kept2;
  }
}

TEST(FilterDataset, RejectsExactlyTheAbsurdSizeCorruptions) {
  SceneConfig cfg;
  cfg.rng_seed = 31;
  cfg.noise.absurd_size_prob = 0.2;
  std::vector<DetectionRecord> corrupted, clean;
  for (const auto& f : generate_frames(cfg, 60)) {
    const std::set<std::int64_t> bad(f.corrupted.begin(), f.corrupted.end());
    for (const auto& r : f.records) (bad.count(r.entity_id) ? corrupted : clean).push_back(r);
  }
  ASSERT_GE(corrupted.size(), 20u);
  ASSERT_GE(clean.size(), 80u);
  std::vector<DetectionRecord> set(corrupted.begin(), corrupted.begin() + 20);
  set.insert(set.end(), clean.begin(), clean.begin() + 80);
  std::shuffle(set.begin(), set.end(), std::mt19937_64(1));
  // Smallest clean footprint is a motorbike at 14 px/m (about 345 px^2); the
  // largest shrunken one is a bus at 0.05 scale (about 51 px^2).
  RuleSet rules;
  rules.min_birdeye_area = 150;
  const auto res = filter_dataset(set, rules, {});
  EXPECT_EQ(keys(res.rejected),
            keys(std::vector<DetectionRecord>(corrupted.begin(), corrupted.begin() + 20)));
  EXPECT_EQ(res.report[Rule::area], 20u);
}

TEST(RejectionReport, CsvLayout) {
  RejectionReport report;
  report[Rule::distance] = 4;
  report[Rule::yaw] = 1;
  report.parse_errors = 2;
  std::ostringstream out;
  write_rejection_report(out, report);
  EXPECT_EQ(out.str(),
            "rule,count\ndistance,4\ncontainment,0\narea,0\naspect,0\nmodel,0\nclass,0\nyaw,1\n"
            "parse_error,2\n");
}

}  // namespace
}  // namespace bevmap
