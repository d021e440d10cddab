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

#include "bevmap/config.hpp"

#include <fstream>

namespace bevmap {
namespace {

using ojson = nlohmann::ordered_json;

ojson optional_value(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> optional_from(const ojson& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

ojson dims_json(const FrameDims& d) { return {{"width", d.width}, {"height", d.height}}; }

void merge_checked(ojson& base, const ojson& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    ojson& slot = base[it.key()];
    if (slot.is_object() && it->is_object())
      merge_checked(slot, *it, key);
    else
      slot = *it;
  }
}

SceneConfig scene_from(const ojson& j) {
  SceneConfig c;
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.vehicles_min = j.at("vehicles_min").get<int>();
  c.vehicles_max = j.at("vehicles_max").get<int>();
  c.distance_min_m = j.at("distance_min_m").get<double>();
  c.distance_max_m = j.at("distance_max_m").get<double>();
  c.ahead_fraction = j.at("ahead_fraction").get<double>();
  c.ahead_half_angle_deg = j.at("ahead_half_angle_deg").get<double>();
  const auto& y = j.at("yaw");
  c.yaw = {y.at("mode_a_deg").get<double>(), y.at("mode_b_deg").get<double>(),
           y.at("weight_a").get<double>(), y.at("concentration").get<double>()};
  c.class_catalog.clear();
  for (const auto& e : j.at("class_catalog")) {
    VehicleClassSpec s;
    s.label = parse_class_label(e.at("class").get<std::string>());
    s.length_m = e.at("length_m").get<double>();
    s.width_m = e.at("width_m").get<double>();
    s.height_m = e.at("height_m").get<double>();
    s.frequency = e.at("frequency").get<double>();
    c.class_catalog.push_back(s);
  }
  c.models_per_class = j.at("models_per_class").get<int>();
  c.model_extent_jitter = j.at("model_extent_jitter").get<double>();
  const auto& f = j.at("frontal_camera");
  c.frontal_camera = {f.at("focal_px").get<double>(), f.at("cx").get<double>(),
                      f.at("cy").get<double>(), f.at("height_m").get<double>(),
                      f.at("pitch_deg").get<double>(),
                      {f.at("width").get<int>(), f.at("height").get<int>()}};
  const auto& b = j.at("birdeye_camera");
  c.birdeye_camera = {b.at("scale_px_per_m").get<double>(),
                      {b.at("width").get<int>(), b.at("height").get<int>()}};
  const auto& n = j.at("noise");
  c.noise = {n.at("box_jitter_px").get<double>(), n.at("drop_one_view_prob").get<double>(),
             n.at("absurd_size_prob").get<double>(), n.at("absurd_scale").get<double>()};
  c.occlusion_culling = j.at("occlusion_culling").get<bool>();
  c.occlusion_threshold = j.at("occlusion_threshold").get<double>();
  return c;
}

RuleSet rules_from(const ojson& j) {
  RuleSet r;
  r.distance_m = {optional_from(j.at("distance_min_m")), optional_from(j.at("distance_max_m"))};
  r.box_in_frame = j.at("box_in_frame").get<bool>();
  r.min_frontal_area = optional_from(j.at("min_frontal_area"));
  r.min_birdeye_area = optional_from(j.at("min_birdeye_area"));
  r.frontal_aspect = {optional_from(j.at("frontal_aspect_min")),
                      optional_from(j.at("frontal_aspect_max"))};
  r.birdeye_aspect = {optional_from(j.at("birdeye_aspect_min")),
                      optional_from(j.at("birdeye_aspect_max"))};
  for (const auto& v : j.at("model_allowlist")) r.model_allowlist.insert(v.get<std::int64_t>());
  for (const auto& v : j.at("model_denylist")) r.model_denylist.insert(v.get<std::int64_t>());
  for (const auto& v : j.at("class_allowlist"))
    r.class_allowlist.insert(parse_class_label(v.get<std::string>()));
  r.yaw_valid = j.at("yaw_valid").get<bool>();
  return r;
}

}  // namespace

ojson to_json(const SceneConfig& c) {
  ojson catalog = ojson::array();
  for (const auto& s : c.class_catalog)
    catalog.push_back({{"class", std::string(to_string(s.label))},
                       {"length_m", s.length_m},
                       {"width_m", s.width_m},
                       {"height_m", s.height_m},
                       {"frequency", s.frequency}});
  ojson frontal = {{"focal_px", c.frontal_camera.focal_px}, {"cx", c.frontal_camera.cx},
                   {"cy", c.frontal_camera.cy},             {"height_m", c.frontal_camera.height_m},
                   {"pitch_deg", c.frontal_camera.pitch_deg}};
  frontal.update(dims_json(c.frontal_camera.dims));
  ojson birdeye = {{"scale_px_per_m", c.birdeye_camera.scale_px_per_m}};
  birdeye.update(dims_json(c.birdeye_camera.dims));
  return {{"rng_seed", c.rng_seed},
          {"vehicles_min", c.vehicles_min},
          {"vehicles_max", c.vehicles_max},
          {"distance_min_m", c.distance_min_m},
          {"distance_max_m", c.distance_max_m},
          {"ahead_fraction", c.ahead_fraction},
          {"ahead_half_angle_deg", c.ahead_half_angle_deg},
          {"yaw",
           {{"mode_a_deg", c.yaw.mode_a_deg},
            {"mode_b_deg", c.yaw.mode_b_deg},
            {"weight_a", c.yaw.weight_a},
            {"concentration", c.yaw.concentration}}},
          {"class_catalog", catalog},
          {"models_per_class", c.models_per_class},
          {"model_extent_jitter", c.model_extent_jitter},
          {"frontal_camera", frontal},
          {"birdeye_camera", birdeye},
          {"noise",
           {{"box_jitter_px", c.noise.box_jitter_px},
            {"drop_one_view_prob", c.noise.drop_one_view_prob},
            {"absurd_size_prob", c.noise.absurd_size_prob},
            {"absurd_scale", c.noise.absurd_scale}}},
          {"occlusion_culling", c.occlusion_culling},
          {"occlusion_threshold", c.occlusion_threshold}};
}

ojson to_json(const RuleSet& r) {
  ojson classes = ojson::array();
  for (ClassLabel c : r.class_allowlist) classes.push_back(std::string(to_string(c)));
  return {{"distance_min_m", optional_value(r.distance_m.min)},
          {"distance_max_m", optional_value(r.distance_m.max)},
          {"box_in_frame", r.box_in_frame},
          {"min_frontal_area", optional_value(r.min_frontal_area)},
          {"min_birdeye_area", optional_value(r.min_birdeye_area)},
          {"frontal_aspect_min", optional_value(r.frontal_aspect.min)},
          {"frontal_aspect_max", optional_value(r.frontal_aspect.max)},
          {"birdeye_aspect_min", optional_value(r.birdeye_aspect.min)},
          {"birdeye_aspect_max", optional_value(r.birdeye_aspect.max)},
          {"model_allowlist", ojson(std::vector<std::int64_t>(r.model_allowlist.begin(),
                                                              r.model_allowlist.end()))},
          {"model_denylist", ojson(std::vector<std::int64_t>(r.model_denylist.begin(),
                                                             r.model_denylist.end()))},
          {"class_allowlist", classes},
          {"yaw_valid", r.yaw_valid}};
}

ojson to_json(const nn::Hyper& h) {
  return {{"lr", h.lr},
          {"beta1", h.beta1},
          {"beta2", h.beta2},
          {"epsilon", h.epsilon},
          {"batch_size", h.batch_size},
          {"max_epochs", h.max_epochs},
          {"patience", h.patience},
          {"rng_seed", h.rng_seed}};
}

ojson to_json(const FeatureConfig& f) {
  return {{"mode", f.mode == FeatureConfig::Mode::file ? "file" : "synthetic"},
          {"feature_dim", f.feature_dim},
          {"seed", f.seed},
          {"perturbation", f.perturbation},
          {"path", f.path.string()}};
}

ojson to_json(const RunConfig& cfg) {
  return {{"scene", to_json(cfg.scene)},
          {"rules", to_json(cfg.rules)},
          {"hyper", to_json(cfg.hyper)},
          {"grid", {{"cell_px", cfg.grid_cell_px}}},
          {"features", to_json(cfg.features)},
          {"train",
           {{"val_fraction", cfg.train.val_fraction},
            {"dropout_p", cfg.train.dropout_p},
            {"precision", std::string(to_string(cfg.train.precision))}}},
          {"eval", {{"bucket_edges", cfg.bucket_edges}}}};
}

RunConfig run_config_from_json(const ojson& patch) {
  ojson full = to_json(RunConfig{});
  merge_checked(full, patch, "");
  RunConfig cfg;
  try {
    cfg.scene = scene_from(full.at("scene"));
    cfg.rules = rules_from(full.at("rules"));
    const auto& h = full.at("hyper");
    cfg.hyper.lr = h.at("lr").get<double>();
    cfg.hyper.beta1 = h.at("beta1").get<double>();
    cfg.hyper.beta2 = h.at("beta2").get<double>();
    cfg.hyper.epsilon = h.at("epsilon").get<double>();
    cfg.hyper.batch_size = h.at("batch_size").get<int>();
    cfg.hyper.max_epochs = h.at("max_epochs").get<int>();
    cfg.hyper.patience = h.at("patience").get<int>();
    cfg.hyper.rng_seed = h.at("rng_seed").get<std::uint64_t>();
    cfg.grid_cell_px = full.at("grid").at("cell_px").get<int>();
    const auto& f = full.at("features");
    const std::string mode = f.at("mode").get<std::string>();
    if (mode != "file" && mode != "synthetic")
      throw ConfigError("config: features.mode must be 'synthetic' or 'file'");
    cfg.features.mode = mode == "file" ? FeatureConfig::Mode::file : FeatureConfig::Mode::synthetic;
    cfg.features.feature_dim = f.at("feature_dim").get<int>();
    cfg.features.seed = f.at("seed").get<std::uint64_t>();
    cfg.features.perturbation = f.at("perturbation").get<double>();
    cfg.features.path = f.at("path").get<std::string>();
    cfg.train.val_fraction = full.at("train").at("val_fraction").get<double>();
    cfg.train.dropout_p = full.at("train").at("dropout_p").get<double>();
    cfg.train.precision = parse_precision(full.at("train").at("precision").get<std::string>());
    cfg.bucket_edges = full.at("eval").at("bucket_edges").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const ojson::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace bevmap
