// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "treeskel/error.hpp"
#include "treeskel/parallel.hpp"

namespace treeskel {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Orthonormal pair spanning the plane orthogonal to unit vector d.
std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& d) {
  const Vec3 helper = std::abs(d.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = d.cross(helper).normalized();
  const Vec3 e2 = d.cross(e1);
  return {e1, e2};
}

std::array<std::size_t, 3> draw_three(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::array<std::size_t, 3> s{};
  s[0] = pick(rng);
  do { s[1] = pick(rng); } while (s[1] == s[0]);
  do { s[2] = pick(rng); } while (s[2] == s[0] || s[2] == s[1]);
  return s;
}

PlaneModel canonical(PlaneModel plane) {
  if (plane.normal.z() < 0.0) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  return plane;
}

std::vector<std::size_t> plane_inliers(const PlaneModel& plane, std::span<const Vec3> points,
                                       double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::abs(plane.signed_distance(points[i])) <= threshold) out.push_back(i);
  }
  return out;
}

CylinderModel canonical(CylinderModel cyl, std::span<const Vec3> points,
                        std::span<const std::size_t> indices) {
  cyl.axis_dir.normalize();
  if (cyl.axis_dir.z() < 0.0) cyl.axis_dir = -cyl.axis_dir;
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i : indices) centroid += points[i];
  if (!indices.empty()) {
    centroid /= static_cast<double>(indices.size());
    cyl.axis_point += cyl.axis_dir * cyl.axis_dir.dot(centroid - cyl.axis_point);
  }
  return cyl;
}

std::vector<std::size_t> cylinder_inliers(const CylinderModel& cyl, std::span<const Vec3> points,
                                          std::span<const std::size_t> candidates,
                                          double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i : candidates) {
    if (std::abs(cyl.axis_distance(points[i]) - cyl.radius) <= threshold) out.push_back(i);
  }
  return out;
}

// Circle through three points in the plane orthogonal to `dir`.
std::optional<CylinderModel> circle_hypothesis(const Vec3& dir, const Vec3& p0, const Vec3& p1,
                                               const Vec3& p2, double max_radius) {
  const auto [e1, e2] = orthonormal_basis(dir);
  const Eigen::Vector2d a(p0.dot(e1), p0.dot(e2));
  const Eigen::Vector2d b(p1.dot(e1), p1.dot(e2));
  const Eigen::Vector2d c(p2.dot(e1), p2.dot(e2));
  const double d = 2.0 * (a.x() * (b.y() - c.y()) + b.x() * (c.y() - a.y()) +
                          c.x() * (a.y() - b.y()));
  if (std::abs(d) < 1e-12) return std::nullopt;
  const double a2 = a.squaredNorm();
  const double b2 = b.squaredNorm();
  const double c2 = c.squaredNorm();
  const Eigen::Vector2d center((a2 * (b.y() - c.y()) + b2 * (c.y() - a.y()) + c2 * (a.y() - b.y())) / d,
                               (a2 * (c.x() - b.x()) + b2 * (a.x() - c.x()) + c2 * (b.x() - a.x())) / d);
  const double radius = (a - center).norm();
  if (!(radius > 0.0) || radius > max_radius) return std::nullopt;
  CylinderModel cyl;
  cyl.axis_dir = dir;
  cyl.axis_point = center.x() * e1 + center.y() * e2;
  cyl.radius = radius;
  return cyl;
}

}  // namespace

double CylinderModel::axis_distance(const Vec3& p) const {
  const Vec3 v = p - axis_point;
  return (v - v.dot(axis_dir) * axis_dir).norm();
}

PlaneModel fit_plane_least_squares(std::span<const Vec3> points,
                                   std::span<const std::size_t> indices) {
  if (indices.size() < 3) throw FitError("plane fit needs at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i : indices) centroid += points[i];
  centroid /= static_cast<double>(indices.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i : indices) {
    const Vec3 d = points[i] - centroid;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  PlaneModel plane;
  plane.normal = solver.eigenvectors().col(0).normalized();
  plane.offset = plane.normal.dot(centroid);
  return canonical(plane);
}

double plane_residual(const PlaneModel& plane, std::span<const Vec3> points,
                      std::span<const std::size_t> indices) {
  double sum = 0.0;
  for (std::size_t i : indices) {
    const double d = plane.signed_distance(points[i]);
    sum += d * d;
  }
  return sum;
}

PlaneFit ransac_plane(std::span<const Vec3> points, const RansacParams& params) {
  if (!(params.distance_threshold > 0.0) || params.max_iterations < 1) {
    throw ParameterError("RANSAC needs threshold > 0 and at least one iteration");
  }
  if (points.size() < 3) throw FitError("plane RANSAC needs at least 3 points");

  std::mt19937_64 rng(params.seed);
  const auto iterations = static_cast<std::size_t>(params.max_iterations);
  std::vector<std::optional<PlaneModel>> hypotheses(iterations);
  for (auto& h : hypotheses) {
    const auto s = draw_three(rng, points.size());
    const Vec3 n = (points[s[1]] - points[s[0]]).cross(points[s[2]] - points[s[0]]);
    const double norm = n.norm();
    if (norm < 1e-12) continue;
    PlaneModel plane;
    plane.normal = n / norm;
    plane.offset = plane.normal.dot(points[s[0]]);
    h = canonical(plane);
  }

  std::vector<std::size_t> counts(iterations, 0);
  parallel_for(iterations, [&](std::size_t h) {
    if (!hypotheses[h]) return;
    std::size_t count = 0;
    for (const auto& p : points) {
      if (std::abs(hypotheses[h]->signed_distance(p)) <= params.distance_threshold) ++count;
    }
    counts[h] = count;
  });

  std::optional<std::size_t> best;
  for (std::size_t h = 0; h < iterations; ++h) {
    if (hypotheses[h] && (!best || counts[h] > counts[*best])) best = h;
  }
  if (!best) throw FitError("all RANSAC plane samples were degenerate");

  PlaneFit fit;
  fit.hypothesis = *hypotheses[*best];
  fit.hypothesis_inliers = plane_inliers(fit.hypothesis, points, params.distance_threshold);
  fit.model = fit_plane_least_squares(points, fit.hypothesis_inliers);
  fit.inliers = plane_inliers(fit.model, points, params.distance_threshold);
  return fit;
}

PlaneFit ransac_plane(const PointCloud& cloud, const RansacParams& params) {
  const auto positions = cloud.positions();
  return ransac_plane(positions, params);
}

Eigen::Isometry3d ground_transform(const PlaneModel& plane) {
  const Eigen::Quaterniond rotation =
      Eigen::Quaterniond::FromTwoVectors(plane.normal.normalized(), Vec3::UnitZ());
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = rotation.toRotationMatrix();
  t.translation() = Vec3(0.0, 0.0, -plane.offset);
  return t;
}

GroundAlignment align_to_ground(const PointCloud& cloud, const PlaneModel& plane) {
  GroundAlignment out;
  out.transform = ground_transform(plane);
  const Eigen::Isometry3d& t = out.transform;
  out.cloud = cloud.transformed([&](const Vec3& p) { return Vec3(t * p); }, t.linear());
  RealField ground_dist(out.cloud.size());
  for (std::size_t i = 0; i < out.cloud.size(); ++i) ground_dist[i] = out.cloud[i].position.z();
  out.cloud.set_field("ground_dist", std::move(ground_dist));
  return out;
}

double cylinder_residual(const CylinderModel& cylinder, std::span<const Vec3> points,
                         std::span<const std::size_t> indices) {
  double sum = 0.0;
  for (std::size_t i : indices) {
    const double r = cylinder.axis_distance(points[i]) - cylinder.radius;
    sum += r * r;
  }
  return sum;
}

CylinderModel refine_cylinder(std::span<const Vec3> points, std::span<const std::size_t> indices,
                              const CylinderModel& initial) {
  using Vec5 = Eigen::Matrix<double, 5, 1>;
  using Mat5 = Eigen::Matrix<double, 5, 5>;
  if (indices.size() < 5) return initial;

  CylinderModel current = canonical(initial, points, indices);
  double cost = cylinder_residual(current, points, indices);

  // Local parametrization around `base`: axis tilt (a, b), axis shift (u, v), radius.
  auto apply = [](const CylinderModel& base, const Vec5& delta) {
    const auto [e1, e2] = orthonormal_basis(base.axis_dir);
    CylinderModel out;
    out.axis_dir = (base.axis_dir + delta[0] * e1 + delta[1] * e2).normalized();
    out.axis_point = base.axis_point + delta[2] * e1 + delta[3] * e2;
    out.radius = base.radius + delta[4];
    return out;
  };

  const std::size_t m = indices.size();
  Eigen::VectorXd residual(m);
  Eigen::Matrix<double, Eigen::Dynamic, 5> jacobian(m, 5);
  double lambda = 1e-3;
  constexpr double kStep = 1e-7;
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t k = 0; k < m; ++k) {
      residual[k] = current.axis_distance(points[indices[k]]) - current.radius;
    }
    for (int p = 0; p < 5; ++p) {
      Vec5 step = Vec5::Zero();
      step[p] = kStep;
      const CylinderModel plus = apply(current, step);
      const CylinderModel minus = apply(current, -step);
      for (std::size_t k = 0; k < m; ++k) {
        const Vec3& x = points[indices[k]];
        jacobian(k, p) = ((plus.axis_distance(x) - plus.radius) -
                          (minus.axis_distance(x) - minus.radius)) / (2.0 * kStep);
      }
    }
    const Mat5 jtj = jacobian.transpose() * jacobian;
    const Vec5 jtr = jacobian.transpose() * residual;

    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Mat5 damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Vec5 delta = damped.ldlt().solve(-jtr);
      if (!delta.allFinite()) break;
      const CylinderModel candidate = canonical(apply(current, delta), points, indices);
      const double candidate_cost = cylinder_residual(candidate, points, indices);
      if (candidate.radius > 0.0 && candidate_cost < cost) {
        const double gain = cost - candidate_cost;
        current = candidate;
        improved = true;
        lambda = std::max(lambda / 3.0, 1e-12);
        if (gain <= 1e-14 * std::max(cost, 1e-30)) {
          cost = candidate_cost;
          return current;
        }
        cost = candidate_cost;
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) break;
  }
  return current;
}

CylinderFit fit_trunk_cylinder(std::span<const Vec3> points, const RansacParams& params,
                               const CylinderFitOptions& options) {
  if (!(params.distance_threshold > 0.0) || params.max_iterations < 1) {
    throw ParameterError("RANSAC needs threshold > 0 and at least one iteration");
  }
  std::vector<std::size_t> slab;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double z = points[i].z();
    if (z >= options.z_min && z <= options.z_max) slab.push_back(i);
  }
  if (slab.size() < std::max<std::size_t>(3, options.min_inliers)) {
    throw FitError("trunk fit: only " + std::to_string(slab.size()) + " points in the z-slab");
  }

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double cos_max = std::cos(options.max_tilt_deg * kDegToRad);
  const auto iterations = static_cast<std::size_t>(params.max_iterations);
  std::vector<std::optional<CylinderModel>> hypotheses(iterations);
  for (auto& h : hypotheses) {
    // Uniform direction on the spherical cap around +Z.
    const double cos_t = 1.0 - unit(rng) * (1.0 - cos_max);
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    const Vec3 dir(sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t);
    const auto s = draw_three(rng, slab.size());
    h = circle_hypothesis(dir, points[slab[s[0]]], points[slab[s[1]]], points[slab[s[2]]],
                          options.max_radius);
  }

  std::vector<std::size_t> counts(iterations, 0);
  parallel_for(iterations, [&](std::size_t h) {
    if (!hypotheses[h]) return;
    std::size_t count = 0;
    for (std::size_t i : slab) {
      if (std::abs(hypotheses[h]->axis_distance(points[i]) - hypotheses[h]->radius) <=
          params.distance_threshold) {
        ++count;
      }
    }
    counts[h] = count;
  });

  std::optional<std::size_t> best;
  for (std::size_t h = 0; h < iterations; ++h) {
    if (hypotheses[h] && (!best || counts[h] > counts[*best])) best = h;
  }
  if (!best || counts[*best] < options.min_inliers) {
    throw FitError("trunk fit: no cylinder hypothesis reached " +
                   std::to_string(options.min_inliers) + " inliers");
  }

  CylinderFit fit;
  fit.hypothesis_inliers =
      cylinder_inliers(*hypotheses[*best], points, slab, params.distance_threshold);
  fit.hypothesis = canonical(*hypotheses[*best], points, fit.hypothesis_inliers);
  CylinderModel model = refine_cylinder(points, fit.hypothesis_inliers, fit.hypothesis);
  std::vector<std::size_t> inliers =
      cylinder_inliers(model, points, slab, params.distance_threshold);
  if (inliers.size() >= options.min_inliers) {
    model = refine_cylinder(points, inliers, model);
    inliers = cylinder_inliers(model, points, slab, params.distance_threshold);
  }
  fit.model = model;
  fit.inliers = std::move(inliers);
  return fit;
}

CylinderModel fit_trunk_cylinder(const PointCloud& cloud, const RansacParams& params,
                                 const CylinderFitOptions& options) {
  const auto positions = cloud.positions();
  return fit_trunk_cylinder(positions, params, options).model;
}

double point_cylinder_distance(const Vec3& p, const CylinderModel& cylinder) {
  return std::abs(cylinder.axis_distance(p) - cylinder.radius);
}

ScaledCloud scale_by_trunk_circumference(const PointCloud& cloud, double measured_circumference,
                                         double measure_height, const CylinderModel& fitted) {
  if (!(measured_circumference > 0.0) || !(measure_height > 0.0) || !(fitted.radius > 0.0)) {
    throw ParameterError("circumference scaling needs positive circumference, height and radius");
  }
  ScaledCloud out;
  out.scale = measured_circumference / (2.0 * std::numbers::pi * fitted.radius);
  const double s = out.scale;
  out.cloud = cloud.transformed([s](const Vec3& p) { return Vec3(s * p); },
                                Eigen::Matrix3d::Identity());
  if (out.cloud.has_field("ground_dist")) {
    RealField g = out.cloud.real_field("ground_dist");
    for (double& v : g) v *= s;
    out.cloud.set_field("ground_dist", std::move(g));
  }
  out.cylinder = fitted;
  out.cylinder.axis_point *= s;
  out.cylinder.radius *= s;
  return out;
}

void to_json(nlohmann::ordered_json& j, const PlaneModel& plane) {
  j = {{"normal", {plane.normal.x(), plane.normal.y(), plane.normal.z()}},
       {"offset", plane.offset}};
}

void from_json(const nlohmann::ordered_json& j, PlaneModel& plane) {
  const auto n = j.at("normal").get<std::vector<double>>();
  if (n.size() != 3) throw DataError("plane normal must have 3 components");
  plane.normal = Vec3(n[0], n[1], n[2]).normalized();
  plane.offset = j.at("offset").get<double>();
}

void to_json(nlohmann::ordered_json& j, const CylinderModel& c) {
  j = {{"axis_point", {c.axis_point.x(), c.axis_point.y(), c.axis_point.z()}},
       {"axis_dir", {c.axis_dir.x(), c.axis_dir.y(), c.axis_dir.z()}},
       {"radius", c.radius}};
}

void from_json(const nlohmann::ordered_json& j, CylinderModel& c) {
  const auto p = j.at("axis_point").get<std::vector<double>>();
  const auto d = j.at("axis_dir").get<std::vector<double>>();
  if (p.size() != 3 || d.size() != 3) throw DataError("cylinder vectors must have 3 components");
  c.axis_point = Vec3(p[0], p[1], p[2]);
  c.axis_dir = Vec3(d[0], d[1], d[2]).normalized();
  c.radius = j.at("radius").get<double>();
  if (!(c.radius > 0.0)) throw DataError("cylinder radius must be positive");
}

}  // namespace treeskel
