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

#ifndef BEVMAP_FILTER_HPP
#define BEVMAP_FILTER_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "bevmap/core_types.hpp"
#include "bevmap/dataset.hpp"

namespace bevmap {

/// Closed interval; an absent end is unbounded.
struct Bounds {
  std::optional<double> min;
  std::optional<double> max;

  bool contains(double v) const { return (!min || v >= *min) && (!max || v <= *max); }
  bool bounded() const { return min || max; }
};

/// Parameters of the rule-based discriminator. Everything defaults to
/// disabled, which makes the discriminator accept every record.
struct RuleSet {
  Bounds distance_m;
  bool box_in_frame = false;
  std::optional<double> min_frontal_area;
  std::optional<double> min_birdeye_area;
  Bounds frontal_aspect;  // width / height
  Bounds birdeye_aspect;
  std::set<std::int64_t> model_allowlist;  // empty = any model
  std::set<std::int64_t> model_denylist;
  std::set<ClassLabel> class_allowlist;    // empty = any class
  bool yaw_valid = false;                  // require yaw in [0, 360)
};

void validate(const RuleSet& rules);

/// Rules in evaluation order; rejection reports attribute each record to the
/// first rule it fails.
enum class Rule { distance, containment, area, aspect, model, class_label, yaw };
inline constexpr std::size_t kRuleCount = 7;
inline constexpr std::array<Rule, kRuleCount> kRuleOrder = {
    Rule::distance, Rule::containment, Rule::area, Rule::aspect,
    Rule::model, Rule::class_label, Rule::yaw};

std::string_view to_string(Rule rule);

std::optional<Rule> first_failing_rule(const DetectionRecord& r, const RuleSet& rules,
                                       const DatasetHeader& header);

/// f(e): true iff every enabled rule passes.
inline bool discriminate(const DetectionRecord& r, const RuleSet& rules,
                         const DatasetHeader& header) {
  return !first_failing_rule(r, rules, header);
}

struct RejectionReport {
  std::array<std::size_t, kRuleCount> counts{};
  std::size_t parse_errors = 0;

  std::size_t rejected() const;
  std::size_t& operator[](Rule r) { return counts[static_cast<std::size_t>(r)]; }
  std::size_t operator[](Rule r) const { return counts[static_cast<std::size_t>(r)]; }
};

struct FilterResult {
  std::vector<DetectionRecord> kept;
  std::vector<DetectionRecord> rejected;
  RejectionReport report;
};

FilterResult filter_dataset(std::span<const DetectionRecord> records, const RuleSet& rules,
                            const DatasetHeader& header);

/// CSV with columns `rule,count`, one row per rule in evaluation order and a
/// final `parse_error` row.
void write_rejection_report(std::ostream& out, const RejectionReport& report);

}  // namespace bevmap

#endif  // BEVMAP_FILTER_HPP
