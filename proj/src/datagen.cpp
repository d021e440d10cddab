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

#include "bevmap/datagen.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

namespace bevmap {
namespace {

constexpr double kNearPlaneM = 0.1;
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::int64_t kEntityStride = 1000;
constexpr std::int64_t kModelStride = 100;

std::size_t class_index(ClassLabel label) {
  return static_cast<std::size_t>(label);
}

/// Box corner pair from a point cloud, clipped to the frame.
std::optional<BBox> clipped_hull(const std::vector<Eigen::Vector2d>& pts, const FrameDims& dims,
                                 View view) {
  if (pts.empty()) return std::nullopt;
  Eigen::Vector2d lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  BBox b{std::max(lo.x(), 0.0), std::max(lo.y(), 0.0),
         std::min(hi.x(), double(dims.width)), std::min(hi.y(), double(dims.height)),
         Space::pixel, view};
  if (b.x_min >= b.x_max || b.y_min >= b.y_max) return std::nullopt;
  return b;
}

/// Separating-axis test for two footprints (convex quads).
bool footprints_overlap(const std::array<Eigen::Vector2d, 4>& a,
                        const std::array<Eigen::Vector2d, 4>& b) {
  auto separated_on = [](const Eigen::Vector2d& axis, const auto& p, const auto& q) {
    double pmin = std::numeric_limits<double>::infinity(), pmax = -pmin;
    double qmin = pmin, qmax = -pmin;
    for (const auto& v : p) {
      pmin = std::min(pmin, axis.dot(v));
      pmax = std::max(pmax, axis.dot(v));
    }
    for (const auto& v : q) {
      qmin = std::min(qmin, axis.dot(v));
      qmax = std::max(qmax, axis.dot(v));
    }
    return pmax < qmin || qmax < pmin;
  };
  for (const auto* quad : {&a, &b}) {
    for (int i = 0; i < 2; ++i) {
      const Eigen::Vector2d edge = (*quad)[i + 1] - (*quad)[i];
      const Eigen::Vector2d axis(-edge.y(), edge.x());
      if (separated_on(axis, a, b)) return false;
    }
  }
  return true;
}

Eigen::Vector3d model_extents(const SceneConfig& cfg, const VehicleClassSpec& cls,
                              std::int64_t model_id) {
  Eigen::Vector3d e(cls.length_m, cls.width_m, cls.height_m);
  if (cfg.model_extent_jitter <= 0) return e;
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed),
                    static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                    static_cast<std::uint32_t>(model_id), 0x6d6f64u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 3; ++i) e(i) *= 1.0 + cfg.model_extent_jitter * u(rng);
  return e;
}

double coverage(const BBox& target, const BBox& cover) {
  const double w = std::min(target.x_max, cover.x_max) - std::max(target.x_min, cover.x_min);
  const double h = std::min(target.y_max, cover.y_max) - std::max(target.y_min, cover.y_min);
  if (w <= 0 || h <= 0 || target.area() <= 0) return 0.0;
  return w * h / target.area();
}

BBox jitter_box(const BBox& b, double sigma, const FrameDims& dims, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  BBox j = b;
  j.x_min += n(rng);
  j.y_min += n(rng);
  j.x_max += n(rng);
  j.y_max += n(rng);
  j = j.ordered();
  j.x_min = std::clamp(j.x_min, 0.0, double(dims.width));
  j.x_max = std::clamp(j.x_max, 0.0, double(dims.width));
  j.y_min = std::clamp(j.y_min, 0.0, double(dims.height));
  j.y_max = std::clamp(j.y_max, 0.0, double(dims.height));
  return j;
}

}  // namespace

std::vector<VehicleClassSpec> default_class_catalog() {
  return {
      {ClassLabel::car, 4.5, 1.8, 1.5, 0.55},
      {ClassLabel::truck, 8.5, 2.5, 3.2, 0.10},
      {ClassLabel::bus, 12.0, 2.5, 3.0, 0.10},
      {ClassLabel::van, 5.5, 2.0, 2.2, 0.15},
      {ClassLabel::motorbike, 2.2, 0.8, 1.2, 0.10},
  };
}

void validate(const SceneConfig& cfg) {
  if (!(cfg.distance_min_m >= 0) || !(cfg.distance_min_m < cfg.distance_max_m))
    throw ConfigError("scene: distance range must satisfy 0 <= min < max");
  if (cfg.vehicles_min < 0 || cfg.vehicles_min > cfg.vehicles_max ||
      cfg.vehicles_max >= kEntityStride)
    throw ConfigError("scene: vehicles per frame must satisfy 0 <= min <= max < 1000");
  if (cfg.class_catalog.empty()) throw ConfigError("scene: class catalog is empty");
  double total = 0;
  for (const auto& c : cfg.class_catalog) {
    if (!(c.frequency >= 0)) throw ConfigError("scene: class frequencies must be non-negative");
    if (!(c.length_m > 0 && c.width_m > 0 && c.height_m > 0))
      throw ConfigError("scene: class extents must be positive");
    total += c.frequency;
  }
  if (!(std::abs(total - 1.0) <= 1e-9))
    throw ConfigError("scene: class frequencies must sum to 1 (got " + std::to_string(total) + ")");
  if (cfg.models_per_class < 1 || cfg.models_per_class > kModelStride)
    throw ConfigError("scene: models_per_class must be in [1, 100]");
  if (!(cfg.model_extent_jitter >= 0 && cfg.model_extent_jitter < 1))
    throw ConfigError("scene: model_extent_jitter must be in [0, 1)");
  if (!(cfg.ahead_fraction >= 0 && cfg.ahead_fraction <= 1))
    throw ConfigError("scene: ahead_fraction must be in [0, 1]");
  if (!(cfg.yaw.weight_a >= 0 && cfg.yaw.weight_a <= 1))
    throw ConfigError("scene: yaw weight must be in [0, 1]");
  if (!(cfg.yaw.concentration >= 0)) throw ConfigError("scene: yaw concentration must be >= 0");
  if (!(cfg.frontal_camera.focal_px > 0)) throw ConfigError("scene: focal length must be > 0");
  if (!(cfg.birdeye_camera.scale_px_per_m > 0))
    throw ConfigError("scene: bird's-eye scale must be > 0");
  validate(cfg.frontal_camera.dims);
  validate(cfg.birdeye_camera.dims);
  const auto& n = cfg.noise;
  for (double p : {n.drop_one_view_prob, n.absurd_size_prob, cfg.occlusion_threshold})
    if (!(p >= 0 && p <= 1)) throw ConfigError("scene: probabilities must be in [0, 1]");
  if (!(n.box_jitter_px >= 0)) throw ConfigError("scene: box jitter must be >= 0");
  if (!(n.absurd_scale > 0)) throw ConfigError("scene: absurd_scale must be > 0");
}

std::array<Eigen::Vector2d, 4> Vehicle3D::footprint() const {
  const double psi = yaw_deg * kDeg;
  const Eigen::Vector2d heading(-std::sin(psi), std::cos(psi));
  const Eigen::Vector2d side(std::cos(psi), std::sin(psi));
  const Eigen::Vector2d l = 0.5 * extents(0) * heading;
  const Eigen::Vector2d w = 0.5 * extents(1) * side;
  return {center_xy - l - w, center_xy - l + w, center_xy + l + w, center_xy + l - w};
}

std::optional<Eigen::Vector2d> project_point_frontal(const Eigen::Vector3d& world,
                                                     const PinholeCamera& cam) {
  const double t = cam.pitch_deg * kDeg;
  const Eigen::Vector3d d(world.x(), world.y(), world.z() - cam.height_m);
  const double depth = d.y() * std::cos(t) - d.z() * std::sin(t);
  const double down = -d.y() * std::sin(t) - d.z() * std::cos(t);
  if (depth <= 0) return std::nullopt;
  return Eigen::Vector2d(cam.cx + cam.focal_px * d.x() / depth,
                         cam.cy + cam.focal_px * down / depth);
}

Eigen::Vector2d project_point_birdeye(const Eigen::Vector2d& ground_xy, const OrthoCamera& cam) {
  return {0.5 * cam.dims.width + cam.scale_px_per_m * ground_xy.x(),
          0.5 * cam.dims.height - cam.scale_px_per_m * ground_xy.y()};
}

std::optional<BBox> project_frontal(const Vehicle3D& v, const PinholeCamera& cam) {
  const double t = cam.pitch_deg * kDeg;
  const auto fp = v.footprint();
  // Corners in camera coordinates (lateral, down, depth); 0-3 bottom, 4-7 top.
  std::array<Eigen::Vector3d, 8> c;
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d d(fp[i % 4].x(), fp[i % 4].y(), (i < 4 ? 0.0 : v.extents(2)) - cam.height_m);
    c[i] = {d.x(), -d.y() * std::sin(t) - d.z() * std::cos(t), d.y() * std::cos(t) - d.z() * std::sin(t)};
  }
  static constexpr std::array<std::array<int, 2>, 12> kEdges = {{
      {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}}};
  std::vector<Eigen::Vector3d> visible;
  for (const auto& p : c)
    if (p.z() >= kNearPlaneM) visible.push_back(p);
  for (const auto& [a, b] : kEdges) {
    const double za = c[a].z() - kNearPlaneM, zb = c[b].z() - kNearPlaneM;
    if ((za < 0) != (zb < 0)) {
      const double s = za / (za - zb);
      visible.push_back(c[a] + s * (c[b] - c[a]));
    }
  }
  std::vector<Eigen::Vector2d> px;
  px.reserve(visible.size());
  for (const auto& p : visible)
    px.emplace_back(cam.cx + cam.focal_px * p.x() / p.z(), cam.cy + cam.focal_px * p.y() / p.z());
  return clipped_hull(px, cam.dims, View::frontal);
}

std::optional<BBox> project_birdeye(const Vehicle3D& v, const OrthoCamera& cam) {
  std::vector<Eigen::Vector2d> px;
  for (const auto& p : v.footprint()) px.push_back(project_point_birdeye(p, cam));
  return clipped_hull(px, cam.dims, View::birdeye);
}

Eigen::Matrix3d ground_plane_homography(const PinholeCamera& frontal, const OrthoCamera& birdeye) {
  const double t = frontal.pitch_deg * kDeg;
  const double h = frontal.height_m;
  Eigen::Matrix3d k;
  k << frontal.focal_px, 0, frontal.cx, 0, frontal.focal_px, frontal.cy, 0, 0, 1;
  // Ground (x, y, 1) -> camera (lateral, down, depth).
  Eigen::Matrix3d ground_to_cam;
  ground_to_cam << 1, 0, 0, 0, -std::sin(t), h * std::cos(t), 0, std::cos(t), h * std::sin(t);
  Eigen::Matrix3d ground_to_bev;
  const double s = birdeye.scale_px_per_m;
  ground_to_bev << s, 0, 0.5 * birdeye.dims.width, 0, -s, 0.5 * birdeye.dims.height, 0, 0, 1;
  return ground_to_bev * (k * ground_to_cam).inverse();
}

std::set<std::int64_t> candidate_set(const std::set<std::int64_t>& frontal_ids,
                                     const std::set<std::int64_t>& birdeye_ids) {
  std::set<std::int64_t> out;
  std::set_intersection(frontal_ids.begin(), frontal_ids.end(), birdeye_ids.begin(),
                        birdeye_ids.end(), std::inserter(out, out.end()));
  return out;
}

GeneratedFrame generate_frame(const SceneConfig& cfg, int frame_index) {
  validate(cfg);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed),
                    static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                    static_cast<std::uint32_t>(frame_index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GeneratedFrame frame;
  char id[32];
  std::snprintf(id, sizeof id, "frame_%06d", frame_index);
  frame.frame_id = id;

  std::vector<double> weights;
  for (const auto& c : cfg.class_catalog) weights.push_back(c.frequency);
  std::discrete_distribution<std::size_t> pick_class(weights.begin(), weights.end());
  std::uniform_int_distribution<int> count_dist(cfg.vehicles_min, cfg.vehicles_max);
  std::uniform_int_distribution<int> pick_model(0, cfg.models_per_class - 1);
  std::uniform_real_distribution<double> distance(cfg.distance_min_m, cfg.distance_max_m);

  const int n_vehicles = count_dist(rng);
  for (int k = 0; k < n_vehicles; ++k) {
    const auto& cls = cfg.class_catalog[pick_class(rng)];
    Vehicle3D v;
    v.entity_id = std::int64_t(frame_index) * kEntityStride + k;
    v.class_label = cls.label;
    v.model_id = std::int64_t(class_index(cls.label)) * kModelStride + pick_model(rng);
    v.extents = model_extents(cfg, cls, v.model_id);
    bool placed = false;
    for (int attempt = 0; attempt < 30 && !placed; ++attempt) {
      const double d = distance(rng);
      const double bearing =
          unit(rng) < cfg.ahead_fraction
              ? (2.0 * unit(rng) - 1.0) * cfg.ahead_half_angle_deg * kDeg
              : (2.0 * unit(rng) - 1.0) * std::numbers::pi;
      v.center_xy = Eigen::Vector2d(d * std::sin(bearing), d * std::cos(bearing));
      const double mode = unit(rng) < cfg.yaw.weight_a ? cfg.yaw.mode_a_deg : cfg.yaw.mode_b_deg;
      double yaw = sample_von_mises(mode * kDeg, cfg.yaw.concentration, rng) / kDeg;
      yaw = std::fmod(yaw, 360.0);
      if (yaw < 0) yaw += 360.0;
      if (yaw >= 360.0) yaw = 0.0;
      v.yaw_deg = yaw;
      placed = true;
      for (const auto& other : frame.vehicles)
        if (footprints_overlap(v.footprint(), other.footprint())) {
          placed = false;
          break;
        }
    }
    if (placed) frame.vehicles.push_back(v);
  }

  struct Views {
    std::optional<BBox> frontal, birdeye;
  };
  std::vector<Views> views(frame.vehicles.size());
  for (std::size_t i = 0; i < frame.vehicles.size(); ++i) {
    views[i].frontal = project_frontal(frame.vehicles[i], cfg.frontal_camera);
    views[i].birdeye = project_birdeye(frame.vehicles[i], cfg.birdeye_camera);
  }

  if (cfg.occlusion_culling) {
    std::vector<std::size_t> order(frame.vehicles.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return frame.vehicles[a].center_xy.norm() < frame.vehicles[b].center_xy.norm();
    });
    std::vector<BBox> nearer;
    for (std::size_t i : order) {
      if (!views[i].frontal) continue;
      const BBox box = *views[i].frontal;
      const bool hidden = std::any_of(nearer.begin(), nearer.end(), [&](const BBox& n) {
        return coverage(box, n) >= cfg.occlusion_threshold;
      });
      nearer.push_back(box);
      if (hidden) views[i].frontal.reset();
    }
  }

  const auto& noise = cfg.noise;
  for (std::size_t i = 0; i < frame.vehicles.size(); ++i) {
    const Vehicle3D& v = frame.vehicles[i];
    Views& view = views[i];
    if (view.frontal && view.birdeye && noise.drop_one_view_prob > 0 &&
        unit(rng) < noise.drop_one_view_prob) {
      if (unit(rng) < 0.5)
        view.frontal.reset();
      else
        view.birdeye.reset();
    }
    if (view.frontal && !view.birdeye) frame.frontal_only.push_back(v.entity_id);
    if (!view.frontal && view.birdeye) frame.birdeye_only.push_back(v.entity_id);
  }

  std::set<std::int64_t> frontal_ids, birdeye_ids;
  for (std::size_t i = 0; i < frame.vehicles.size(); ++i) {
    if (views[i].frontal) frontal_ids.insert(frame.vehicles[i].entity_id);
    if (views[i].birdeye) birdeye_ids.insert(frame.vehicles[i].entity_id);
  }
  const auto candidates = candidate_set(frontal_ids, birdeye_ids);

  for (std::size_t i = 0; i < frame.vehicles.size(); ++i) {
    const Vehicle3D& v = frame.vehicles[i];
    if (!candidates.contains(v.entity_id)) continue;
    DetectionRecord r;
    r.frame_id = frame.frame_id;
    r.entity_id = v.entity_id;
    r.model_id = v.model_id;
    r.class_label = v.class_label;
    r.frontal_box = *views[i].frontal;
    r.birdeye_box = *views[i].birdeye;
    r.distance_m = v.center_xy.norm();
    r.yaw_deg = v.yaw_deg;
    if (noise.box_jitter_px > 0) {
      r.frontal_box = jitter_box(r.frontal_box, noise.box_jitter_px, cfg.frontal_camera.dims, rng);
      r.birdeye_box = jitter_box(r.birdeye_box, noise.box_jitter_px, cfg.birdeye_camera.dims, rng);
    }
    if (noise.absurd_size_prob > 0 && unit(rng) < noise.absurd_size_prob) {
      const Eigen::Vector2d c = r.birdeye_box.center();
      const double hw = 0.5 * noise.absurd_scale * r.birdeye_box.width();
      const double hh = 0.5 * noise.absurd_scale * r.birdeye_box.height();
      r.birdeye_box = {c.x() - hw, c.y() - hh, c.x() + hw, c.y() + hh, Space::pixel, View::birdeye};
      frame.corrupted.push_back(v.entity_id);
    }
    frame.records.push_back(std::move(r));
  }
  return frame;
}

std::vector<GeneratedFrame> generate_frames(const SceneConfig& cfg, int n_frames) {
  if (n_frames <= 0) throw ConfigError("generate_frames: frame count must be positive");
  validate(cfg);
  std::vector<GeneratedFrame> frames;
  frames.reserve(n_frames);
  for (int t = 0; t < n_frames; ++t) frames.push_back(generate_frame(cfg, t));
  return frames;
}

Dataset to_dataset(const SceneConfig& cfg, const std::vector<GeneratedFrame>& frames) {
  Dataset data;
  data.header.frontal_dims = cfg.frontal_camera.dims;
  data.header.birdeye_dims = cfg.birdeye_camera.dims;
  for (const auto& f : frames)
    data.records.insert(data.records.end(), f.records.begin(), f.records.end());
  return data;
}

}  // namespace bevmap
