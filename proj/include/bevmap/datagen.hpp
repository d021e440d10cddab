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

#ifndef BEVMAP_DATAGEN_HPP
#define BEVMAP_DATAGEN_HPP

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bevmap/core_types.hpp"
#include "bevmap/dataset.hpp"

namespace bevmap {

// World frame: player at the origin of the ground plane, +x right, +y
// forward, +z up.

/// Dashboard camera: pinhole at (0, 0, height_m), looking along +y and
/// pitched down by pitch_deg.
struct PinholeCamera {
  double focal_px = 1000.0;
  double cx = 960.0;
  double cy = 540.0;
  double height_m = 1.5;
  double pitch_deg = 0.0;
  FrameDims dims;
};

/// Top-down orthographic map centered on the player, forward pointing up.
/// The covered extent is dims / scale meters.
struct OrthoCamera {
  double scale_px_per_m = 14.0;
  FrameDims dims;
};

struct VehicleClassSpec {
  ClassLabel label = ClassLabel::car;
  double length_m = 4.5;
  double width_m = 1.8;
  double height_m = 1.5;
  double frequency = 1.0;
};

std::vector<VehicleClassSpec> default_class_catalog();

/// Two-mode von Mises mixture over yaw.
struct YawMixture {
  double mode_a_deg = 0.0;
  double mode_b_deg = 180.0;
  double weight_a = 0.5;
  double concentration = 20.0;  // 0 gives a uniform yaw
};

struct NoiseConfig {
  double box_jitter_px = 0.0;         // Gaussian sigma on every box coordinate
  double drop_one_view_prob = 0.0;    // entity vanishes from one of the two views
  double absurd_size_prob = 0.0;      // bird's-eye box shrunk by absurd_scale
  double absurd_scale = 0.05;
};

struct SceneConfig {
  std::uint64_t rng_seed = 0;
  int vehicles_min = 3;
  int vehicles_max = 12;
  double distance_min_m = 5.0;
  double distance_max_m = 30.0;
  /// Fraction of vehicles placed within +-ahead_half_angle_deg of the heading;
  /// the rest get a uniform bearing.
  double ahead_fraction = 0.8;
  double ahead_half_angle_deg = 40.0;
  YawMixture yaw;
  std::vector<VehicleClassSpec> class_catalog = default_class_catalog();
  /// Each class owns this many vehicle models; model extents are the class
  /// extents scaled per dimension by a factor in [1 - j, 1 + j].
  int models_per_class = 8;
  double model_extent_jitter = 0.0;
  PinholeCamera frontal_camera;
  OrthoCamera birdeye_camera;
  NoiseConfig noise;
  bool occlusion_culling = false;
  double occlusion_threshold = 0.9;  // fraction of a box covered by a nearer one
};

/// Throws ConfigError for unsatisfiable configurations.
void validate(const SceneConfig& cfg);

struct Vehicle3D {
  std::int64_t entity_id = 0;
  std::int64_t model_id = 0;
  ClassLabel class_label = ClassLabel::car;
  Eigen::Vector2d center_xy = Eigen::Vector2d::Zero();
  double yaw_deg = 0.0;
  Eigen::Vector3d extents = Eigen::Vector3d::Ones();  // length, width, height

  /// Footprint corners: rear-left, rear-right, front-right, front-left.
  std::array<Eigen::Vector2d, 4> footprint() const;
};

struct GeneratedFrame {
  std::string frame_id;
  std::vector<DetectionRecord> records;       // entities in the candidate set
  std::vector<std::int64_t> frontal_only;     // visible only in the frontal view
  std::vector<std::int64_t> birdeye_only;     // visible only in the bird's-eye view
  std::vector<std::int64_t> corrupted;        // records altered by absurd-size noise
  std::vector<Vehicle3D> vehicles;            // full ground truth
};

/// Frame t uses an RNG substream derived from (rng_seed, t), so frames can be
/// generated independently and in any order.
GeneratedFrame generate_frame(const SceneConfig& cfg, int frame_index);
std::vector<GeneratedFrame> generate_frames(const SceneConfig& cfg, int n_frames);

/// Flattens frames into a dataset carrying both camera frame sizes.
Dataset to_dataset(const SceneConfig& cfg, const std::vector<GeneratedFrame>& frames);

/// Axis-aligned hull of the projected box corners, clipped against the near
/// plane and the frame. None when nothing is visible.
std::optional<BBox> project_frontal(const Vehicle3D& v, const PinholeCamera& cam);
std::optional<BBox> project_birdeye(const Vehicle3D& v, const OrthoCamera& cam);

/// Pixel position of a world point in the dashboard camera; none at or behind
/// the camera plane.
std::optional<Eigen::Vector2d> project_point_frontal(const Eigen::Vector3d& world,
                                                     const PinholeCamera& cam);
Eigen::Vector2d project_point_birdeye(const Eigen::Vector2d& ground_xy, const OrthoCamera& cam);

/// Exact map taking frontal pixels of ground-plane points to bird's-eye pixels.
Eigen::Matrix3d ground_plane_homography(const PinholeCamera& frontal, const OrthoCamera& birdeye);

/// Entities visible in both views: E(t) = E_frontal(t) ∩ E_birdeye(t).
std::set<std::int64_t> candidate_set(const std::set<std::int64_t>& frontal_ids,
                                     const std::set<std::int64_t>& birdeye_ids);

/// Draws from a von Mises distribution (Best & Fisher rejection sampler).
/// Angles in radians; kappa = 0 is uniform on [-pi, pi).
template <typename Rng>
double sample_von_mises(double mu, double kappa, Rng& rng);

}  // namespace bevmap

#include "bevmap/detail/von_mises.hpp"

#endif  // BEVMAP_DATAGEN_HPP
