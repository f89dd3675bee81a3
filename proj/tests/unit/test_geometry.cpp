// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "treeskel/error.hpp"
#include "treeskel/geometry.hpp"

namespace treeskel {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

/// Noisy samples of the plane n.p = d inside a 4 m square plus uniform outliers.
std::vector<Vec3> noisy_plane(std::mt19937_64& rng, const Vec3& n, double d, std::size_t count,
                              double sigma, double outlier_share) {
  std::normal_distribution<double> noise(0.0, sigma);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const Vec3 a = n.unitOrthogonal();
  const Vec3 b = n.cross(a);
  std::vector<Vec3> pts;
  const auto outliers = static_cast<std::size_t>(outlier_share * count);
  for (std::size_t i = 0; i < count - outliers; ++i) {
    pts.push_back(d * n + u(rng) * a + u(rng) * b + noise(rng) * n);
  }
  for (std::size_t i = 0; i < outliers; ++i) pts.emplace_back(u(rng), u(rng), u(rng) + 1.0);
  return pts;
}

std::vector<Vec3> noisy_cylinder(std::mt19937_64& rng, const CylinderModel& c, std::size_t count,
                                 double sigma, double height) {
  std::normal_distribution<double> noise(0.0, sigma);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec3 a = c.axis_dir.unitOrthogonal();
  const Vec3 b = c.axis_dir.cross(a);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < count; ++i) {
    const double phi = 2.0 * std::numbers::pi * u(rng);
    const double r = c.radius + noise(rng);
    pts.push_back(c.axis_point + height * u(rng) * c.axis_dir +
                  r * (std::cos(phi) * a + std::sin(phi) * b));
  }
  return pts;
}

TEST(PlaneRansac, RecoversNormalWithinOneDegree) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> tilt(0.0, 0.1);
    const Vec3 n = Vec3(tilt(rng), tilt(rng), 1.0).normalized();
    const auto pts = noisy_plane(rng, n, 0.2, 3000, 0.002, 0.2);
    const PlaneFit fit = ransac_plane(pts, {0.006, 1000, seed});
    const double angle = std::acos(std::min(1.0, std::abs(fit.model.normal.dot(n)))) / kDeg;
    EXPECT_LT(angle, 1.0) << "seed " << seed;
    EXPECT_GE(fit.model.normal.z(), 0.0);
    EXPECT_NEAR(fit.model.offset, 0.2, 0.01);
  }
}

TEST(PlaneRansac, DeterministicPerSeed) {
  std::mt19937_64 rng(9);
  const auto pts = noisy_plane(rng, Vec3::UnitZ(), 0.0, 500, 0.002, 0.3);
  const PlaneFit a = ransac_plane(pts, {0.006, 200, 4});
  const PlaneFit b = ransac_plane(pts, {0.006, 200, 4});
  EXPECT_EQ(a.model.normal, b.model.normal);
  EXPECT_EQ(a.inliers, b.inliers);
}

TEST(PlaneRansac, RejectsTooFewPoints) {
  const std::vector<Vec3> pts = {Vec3::Zero(), Vec3::UnitX()};
  EXPECT_THROW(ransac_plane(pts, {}), FitError);
}

TEST(PlaneLeastSquares, ExactOnNoiselessPoints) {
  std::mt19937_64 rng(1);
  const Vec3 n = Vec3(0.3, -0.2, 1.0).normalized();
  const auto pts = noisy_plane(rng, n, -0.7, 50, 0.0, 0.0);
  std::vector<std::size_t> all(pts.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const PlaneModel p = fit_plane_least_squares(pts, all);
  EXPECT_NEAR(std::abs(p.normal.dot(n)), 1.0, 1e-12);
  EXPECT_NEAR(plane_residual(p, pts, all), 0.0, 1e-20);
}

TEST(GroundAlignment, MapsPlaneToZeroHeight) {
  std::mt19937_64 rng(3);
  const Vec3 n = Vec3(0.1, 0.05, 1.0).normalized();
  const auto pts = noisy_plane(rng, n, 0.4, 200, 0.0, 0.0);
  const PlaneModel plane{n, 0.4};
  const auto aligned = align_to_ground(testing::cloud_from(pts), plane);
  for (std::size_t i = 0; i < aligned.cloud.size(); ++i) {
    EXPECT_NEAR(aligned.cloud[i].position.z(), 0.0, 1e-12);
    EXPECT_EQ(aligned.cloud.real_field("ground_dist")[i], aligned.cloud[i].position.z());
  }
  EXPECT_NEAR((aligned.transform.linear() * n - Vec3::UnitZ()).norm(), 0.0, 1e-12);
  // Rigid: pairwise distances are kept.
  EXPECT_NEAR((aligned.cloud[0].position - aligned.cloud[1].position).norm(),
              (pts[0] - pts[1]).norm(), 1e-12);
}

TEST(CylinderRansac, RecoversRadiusWithinFivePercent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CylinderModel truth;
    truth.radius = 0.05 + 0.15 * u(rng);
    truth.axis_dir = Vec3(0.08 * (u(rng) - 0.5), 0.08 * (u(rng) - 0.5), 1.0).normalized();
    truth.axis_point = Vec3(u(rng), u(rng), 0.0);
    auto pts = noisy_cylinder(rng, truth, 3000, 0.003, 1.5);
    // Clutter: a side branch and scattered points.
    CylinderModel branch{truth.axis_point + Vec3(0, 0, 0.7), Vec3(1, 0, 0.3).normalized(), 0.02};
    const auto side = noisy_cylinder(rng, branch, 400, 0.003, 0.6);
    pts.insert(pts.end(), side.begin(), side.end());
    for (int i = 0; i < 200; ++i) {
      pts.push_back(truth.axis_point + Vec3(u(rng) - 0.5, u(rng) - 0.5, 1.5 * u(rng)));
    }
    const CylinderFit fit = fit_trunk_cylinder(pts, {0.01, 2000, seed}, {});
    EXPECT_LT(std::abs(fit.model.radius - truth.radius) / truth.radius, 0.05)
        << "seed " << seed << " fitted " << fit.model.radius << " true " << truth.radius;
    EXPECT_GT(std::abs(fit.model.axis_dir.dot(truth.axis_dir)), std::cos(2.0 * kDeg));
  }
}

TEST(CylinderRefine, NeverIncreasesResidual) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> jitter(0.0, 0.01);
  for (int instance = 0; instance < 20; ++instance) {
    const CylinderModel truth{Vec3::Zero(), Vec3::UnitZ(), 0.1};
    const auto pts = noisy_cylinder(rng, truth, 300, 0.004, 1.0);
    std::vector<std::size_t> all(pts.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    CylinderModel start = truth;
    start.axis_point += Vec3(jitter(rng), jitter(rng), 0.0);
    start.radius += jitter(rng);
    const CylinderModel refined = refine_cylinder(pts, all, start);
    EXPECT_LE(cylinder_residual(refined, pts, all), cylinder_residual(start, pts, all));
  }
}

TEST(CylinderRansac, FailsWithoutSupport) {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0.5), Vec3(0.1, 0, 0.6)};
  EXPECT_THROW(fit_trunk_cylinder(pts, {}, {}), FitError);
}

TEST(Cylinder, SurfaceDistance) {
  const CylinderModel c{Vec3(1, 1, 0), Vec3::UnitZ(), 0.5};
  EXPECT_DOUBLE_EQ(point_cylinder_distance(Vec3(1, 1, 3), c), 0.5);
  EXPECT_DOUBLE_EQ(point_cylinder_distance(Vec3(3, 1, -2), c), 1.5);
  EXPECT_DOUBLE_EQ(point_cylinder_distance(Vec3(1, 1.5, 0), c), 0.0);
}

TEST(Scaling, MatchesMeasuredCircumference) {
  const auto cloud = testing::cloud_from({Vec3(1, 2, 3), Vec3(-1, 0, 0.5)});
  const CylinderModel fitted{Vec3(0.1, 0.2, 0.0), Vec3::UnitZ(), 0.08};
  const ScaledCloud s = scale_by_trunk_circumference(cloud, 0.6, 0.5, fitted);
  EXPECT_NEAR(2.0 * std::numbers::pi * s.cylinder.radius, 0.6, 1e-12);
  EXPECT_NEAR((s.cloud[0].position - s.scale * Vec3(1, 2, 3)).norm(), 0.0, 1e-12);
  EXPECT_THROW(scale_by_trunk_circumference(cloud, 0.0, 0.5, fitted), ParameterError);
}

TEST(GeometryJson, RoundTrip) {
  const CylinderModel c{Vec3(0.1, -0.2, 0.3), Vec3(0.0, 0.6, 0.8), 0.123456789};
  const CylinderModel back = nlohmann::ordered_json(c).get<CylinderModel>();
  EXPECT_EQ(back.axis_point, c.axis_point);
  EXPECT_EQ(back.radius, c.radius);
  EXPECT_NEAR((back.axis_dir - c.axis_dir).norm(), 0.0, 1e-15);
  const PlaneModel p{Vec3(0, 0, 1), -0.25};
  EXPECT_EQ(nlohmann::ordered_json(p).get<PlaneModel>().offset, -0.25);
}

}  // namespace
}  // namespace treeskel
