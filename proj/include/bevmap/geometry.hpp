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

#ifndef BEVMAP_GEOMETRY_HPP
#define BEVMAP_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bevmap/core_types.hpp"

namespace bevmap {

template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
struct Correspondence {
  Vector2<Scalar> source;
  Vector2<Scalar> target;
};

/// Two pairs per record: frontal bottom-left -> bird's-eye bottom-left and
/// frontal bottom-right -> bird's-eye bottom-right, in pixels.
std::vector<Correspondence<double>> collect_correspondences(
    std::span<const DetectionRecord> records);

/// Projects a point; throws PointAtInfinityError when |w| < 1e-12.
template <typename Derived>
Vector2<typename Derived::Scalar> apply_homography(const Eigen::MatrixBase<Derived>& h,
                                                   const Vector2<typename Derived::Scalar>& p) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, 3, 1> q = h * p.homogeneous();
  if (std::abs(q(2)) < Scalar(1e-12))
    throw PointAtInfinityError("homography maps point to infinity");
  return q.hnormalized();
}

/// Rescales to unit Frobenius norm with a non-negative bottom-right entry.
template <typename Scalar>
Matrix3<Scalar> normalize_homography(const Matrix3<Scalar>& h) {
  Matrix3<Scalar> out = h / h.norm();
  if (out(2, 2) < Scalar(0)) out = -out;
  return out;
}

namespace detail {

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
template <typename Scalar>
Matrix3<Scalar> conditioning_transform(const std::vector<Vector2<Scalar>>& pts) {
  Vector2<Scalar> centroid = Vector2<Scalar>::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= Scalar(pts.size());
  Scalar mean_dist(0);
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= Scalar(pts.size());
  if (!(mean_dist > Scalar(0)))
    throw DegeneracyError("homography: all points coincide");
  const Scalar s = std::sqrt(Scalar(2)) / mean_dist;
  Matrix3<Scalar> t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

template <typename Scalar>
bool collinear(const std::vector<Vector2<Scalar>>& pts, const Matrix3<Scalar>& conditioning) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 3> m(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i)
    m.row(i) = (conditioning * pts[i].homogeneous()).transpose();
  const auto sv = Eigen::JacobiSVD<decltype(m)>(m).singularValues();
  return sv(2) <= Scalar(1e-9) * sv(0);
}

}  // namespace detail

/// Normalized direct linear transform: condition both point sets, take the
/// smallest right singular vector of the 2N x 9 system, undo the
/// conditioning, then normalize. Throws InsufficientDataError below four
/// pairs and DegeneracyError for collinear or rank-deficient input.
template <typename Scalar>
Matrix3<Scalar> estimate_homography(std::span<const Correspondence<Scalar>> pairs) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, 9>;
  if (pairs.size() < 4)
    throw InsufficientDataError("homography needs at least 4 correspondences, got " +
                                std::to_string(pairs.size()));
  std::vector<Vector2<Scalar>> src, dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (const auto& c : pairs) {
    src.push_back(c.source);
    dst.push_back(c.target);
  }
  const Matrix3<Scalar> ts = detail::conditioning_transform(src);
  const Matrix3<Scalar> td = detail::conditioning_transform(dst);
  if (detail::collinear(src, ts) || detail::collinear(dst, td))
    throw DegeneracyError("homography: correspondences are collinear");

  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  Mat a = Mat::Zero(std::max<Eigen::Index>(2 * n, 9), 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector2<Scalar> p = (ts * src[i].homogeneous()).hnormalized();
    const Vector2<Scalar> q = (td * dst[i].homogeneous()).hnormalized();
    const Scalar x = p.x(), y = p.y(), u = q.x(), v = q.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(7) - sv(8) <= Scalar(1e-9) * sv(0))
    throw DegeneracyError("homography: correspondence system is rank deficient");
  const Eigen::Matrix<Scalar, 9, 1> h = svd.matrixV().col(8);
  Matrix3<Scalar> hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return normalize_homography<Scalar>(td.inverse() * hn * ts);
}

template <typename Scalar>
Matrix3<Scalar> estimate_homography(const std::vector<Correspondence<Scalar>>& pairs) {
  return estimate_homography(std::span<const Correspondence<Scalar>>(pairs));
}

/// Fitted homography baseline: projective map of bottom corners plus the
/// mean bird's-eye box height used to complete predicted boxes.
struct Homography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity() / std::sqrt(3.0);
  double avg_height_px = 0.0;
};

/// Mean bird's-eye box height; throws InsufficientDataError when empty.
double mean_training_height(std::span<const DetectionRecord> records);

Homography fit_homography(std::span<const DetectionRecord> records);

/// Bottom edge spans the projected bottom corners' x-range at their mean y;
/// the box extends avg_height_px upward from it.
BBox homography_predict(const Homography& model, const BBox& frontal_box);

/// JSON: {"kind":"homography","h":[9 numbers, row-major],"avg_height_px":x}.
void save_homography(const std::filesystem::path& path, const Homography& model);
Homography load_homography(const std::filesystem::path& path);
std::string format_homography(const Homography& model);
Homography parse_homography(const std::string& text);

}  // namespace bevmap

#endif  // BEVMAP_GEOMETRY_HPP
