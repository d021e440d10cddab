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

#include "bevmap/filter.hpp"

#include <ostream>

namespace bevmap {
namespace {

void check_bounds(const Bounds& b, const char* name) {
  if (b.min && b.max && *b.min > *b.max)
    throw ConfigError(std::string("rules: ") + name + " has min > max");
}

bool aspect_ok(const BBox& b, const Bounds& bounds) {
  if (!bounds.bounded()) return true;
  if (b.height() <= 0) return false;
  return bounds.contains(b.width() / b.height());
}

}  // namespace

void validate(const RuleSet& rules) {
  check_bounds(rules.distance_m, "distance_m");
  check_bounds(rules.frontal_aspect, "frontal_aspect");
  check_bounds(rules.birdeye_aspect, "birdeye_aspect");
}

std::string_view to_string(Rule rule) {
  switch (rule) {
    case Rule::distance: return "distance";
    case Rule::containment: return "containment";
    case Rule::area: return "area";
    case Rule::aspect: return "aspect";
    case Rule::model: return "model";
    case Rule::class_label: return "class";
    case Rule::yaw: return "yaw";
  }
  return "unknown";
}

std::optional<Rule> first_failing_rule(const DetectionRecord& r, const RuleSet& rules,
                                       const DatasetHeader& header) {
  if (!rules.distance_m.contains(r.distance_m)) return Rule::distance;
  if (rules.box_in_frame && (!inside_frame(r.frontal_box, header.frontal_dims) ||
                             !inside_frame(r.birdeye_box, header.birdeye_dims)))
    return Rule::containment;
  if ((rules.min_frontal_area && r.frontal_box.area() < *rules.min_frontal_area) ||
      (rules.min_birdeye_area && r.birdeye_box.area() < *rules.min_birdeye_area))
    return Rule::area;
  if (!aspect_ok(r.frontal_box, rules.frontal_aspect) ||
      !aspect_ok(r.birdeye_box, rules.birdeye_aspect))
    return Rule::aspect;
  if ((!rules.model_allowlist.empty() && !rules.model_allowlist.contains(r.model_id)) ||
      rules.model_denylist.contains(r.model_id))
    return Rule::model;
  if (!rules.class_allowlist.empty() && !rules.class_allowlist.contains(r.class_label))
    return Rule::class_label;
  if (rules.yaw_valid && !(r.yaw_deg >= 0.0 && r.yaw_deg < 360.0)) return Rule::yaw;
  return std::nullopt;
}

std::size_t RejectionReport::rejected() const {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  return n;
}

FilterResult filter_dataset(std::span<const DetectionRecord> records, const RuleSet& rules,
                            const DatasetHeader& header) {
  validate(rules);
  FilterResult result;
  for (const auto& r : records) {
    if (auto failed = first_failing_rule(r, rules, header)) {
      ++result.report[*failed];
      result.rejected.push_back(r);
    } else {
      result.kept.push_back(r);
    }
  }
  return result;
}

void write_rejection_report(std::ostream& out, const RejectionReport& report) {
  out << "rule,count\n";
  for (Rule r : kRuleOrder) out << to_string(r) << ',' << report[r] << '\n';
  out << "parse_error," << report.parse_errors << '\n';
}

}  // namespace bevmap
