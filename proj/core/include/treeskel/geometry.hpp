// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "treeskel/point_cloud.hpp"

namespace treeskel {

/// Plane {p : normal . p = offset} with normal.z >= 0.
struct PlaneModel {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

struct CylinderModel {
  Vec3 axis_point = Vec3::Zero();
  Vec3 axis_dir = Vec3::UnitZ();
  double radius = 0.0;

  double axis_distance(const Vec3& p) const;
};

struct RansacParams {
  double distance_threshold = 0.01;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
};

struct PlaneFit {
  PlaneModel model;                      ///< least-squares refined
  std::vector<std::size_t> inliers;      ///< inliers of the refined model
  PlaneModel hypothesis;                 ///< best minimal-sample hypothesis
  std::vector<std::size_t> hypothesis_inliers;
};

PlaneFit ransac_plane(std::span<const Vec3> points, const RansacParams& params);
PlaneFit ransac_plane(const PointCloud& cloud, const RansacParams& params);

/// Total least squares plane through the selected points.
PlaneModel fit_plane_least_squares(std::span<const Vec3> points,
                                   std::span<const std::size_t> indices);
/// Sum of squared orthogonal distances over `indices`.
double plane_residual(const PlaneModel& plane, std::span<const Vec3> points,
                      std::span<const std::size_t> indices);

struct GroundAlignment {
  PointCloud cloud;  ///< transformed, with real field "ground_dist" = z
  Eigen::Isometry3d transform = Eigen::Isometry3d::Identity();
};

/// Rigid motion taking the plane normal to +Z and the plane to z = 0.
Eigen::Isometry3d ground_transform(const PlaneModel& plane);
GroundAlignment align_to_ground(const PointCloud& cloud, const PlaneModel& plane);

struct CylinderFitOptions {
  double z_min = 0.2;
  double z_max = 1.2;
  double max_tilt_deg = 15.0;
  double max_radius = 1.0;
  std::size_t min_inliers = 10;
};

struct CylinderFit {
  CylinderModel model;
  std::vector<std::size_t> inliers;
  CylinderModel hypothesis;
  std::vector<std::size_t> hypothesis_inliers;
};

/// RANSAC over near-vertical axis hypotheses on the z-slab, followed by a
/// Levenberg-Marquardt refinement over the inliers. Throws FitError when no
/// hypothesis gathers `min_inliers` support.
CylinderFit fit_trunk_cylinder(std::span<const Vec3> points, const RansacParams& params,
                               const CylinderFitOptions& options = {});
CylinderModel fit_trunk_cylinder(const PointCloud& cloud, const RansacParams& params,
                                 const CylinderFitOptions& options = {});

/// Monotone Levenberg-Marquardt on (||p - axis|| - radius)^2 over `indices`,
/// started from `initial`. Never returns a model with larger residual.
CylinderModel refine_cylinder(std::span<const Vec3> points, std::span<const std::size_t> indices,
                              const CylinderModel& initial);
double cylinder_residual(const CylinderModel& cylinder, std::span<const Vec3> points,
                         std::span<const std::size_t> indices);

/// Unsigned distance from p to the infinite cylinder surface.
double point_cylinder_distance(const Vec3& p, const CylinderModel& cylinder);

struct ScaledCloud {
  PointCloud cloud;
  CylinderModel cylinder;
  double scale = 1.0;
};

/// Uniform scaling about the origin so that the fitted trunk circumference
/// equals `measured_circumference`. `measure_height` is the height above
/// ground at which the circumference was taken; it must be positive.
ScaledCloud scale_by_trunk_circumference(const PointCloud& cloud, double measured_circumference,
                                         double measure_height, const CylinderModel& fitted);

void to_json(nlohmann::ordered_json& j, const PlaneModel& plane);
void from_json(const nlohmann::ordered_json& j, PlaneModel& plane);
void to_json(nlohmann::ordered_json& j, const CylinderModel& cylinder);
void from_json(const nlohmann::ordered_json& j, CylinderModel& cylinder);

}  // namespace treeskel
