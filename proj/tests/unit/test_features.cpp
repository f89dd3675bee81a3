// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "treeskel/color.hpp"
#include "treeskel/error.hpp"
#include "treeskel/features.hpp"
#include "treeskel/geometry.hpp"
#include "treeskel/parallel.hpp"

namespace treeskel {
namespace {

/// Population covariance by the textbook two-pass formula.
Eigen::Matrix3d covariance(const std::vector<Vec3>& pts) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) c += (p - mean) * (p - mean).transpose();
  return c / static_cast<double>(pts.size());
}

TEST(Eigen, CollinearPointsHaveUnitLinearity) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int instance = 0; instance < 50; ++instance) {
    const Vec3 origin(u(rng), u(rng), u(rng));
    const Vec3 dir = Vec3(u(rng), u(rng), u(rng)).normalized();
    std::vector<Vec3> pts;
    for (int i = 0; i < 30; ++i) pts.push_back(origin + u(rng) * dir);
    const auto e = eigen_of(pts);
    EXPECT_NEAR(linearity(e), 1.0, 1e-9);
    EXPECT_NEAR(planarity(e), 0.0, 1e-9);
    EXPECT_NEAR(std::abs(e.vectors[0].dot(dir)), 1.0, 1e-9);
  }
}

TEST(Eigen, PlanarPointsHaveZeroSmallestEigenvalue) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int instance = 0; instance < 50; ++instance) {
    const Vec3 n = Vec3(u(rng), u(rng), u(rng)).normalized();
    const Vec3 a = n.unitOrthogonal();
    const Vec3 b = n.cross(a);
    std::vector<Vec3> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(Vec3(0.3, 0.1, -0.2) + u(rng) * a + u(rng) * b);
    const auto e = eigen_of(pts);
    EXPECT_NEAR(e.values[2], 0.0, 1e-9);
    EXPECT_NEAR(std::abs(e.normal().dot(n)), 1.0, 1e-9);
    EXPECT_GE(e.normal().z(), 0.0);
  }
}

TEST(Eigen, RatiosPartitionUnity) {
  std::mt19937_64 rng(3);
  for (int instance = 0; instance < 200; ++instance) {
    const auto pts = testing::random_points(rng, 3 + rng() % 50, 0.5);
    const auto e = eigen_of(pts);
    EXPECT_NEAR(linearity(e) + planarity(e) + e.values[2] / e.values[0], 1.0, 1e-9);
    EXPECT_NEAR(pca1(e) + pca2(e) + surface_variation(e), 1.0, 1e-9);
  }
}

TEST(Eigen, MatchesCovarianceInvariants) {
  std::mt19937_64 rng(4);
  for (int instance = 0; instance < 100; ++instance) {
    const auto pts = testing::random_points(rng, 4 + rng() % 60, 2.0);
    const Eigen::Matrix3d c = covariance(pts);
    const auto e = eigen_of(pts);
    const double scale = c.norm();
    EXPECT_NEAR(e.values[0] + e.values[1] + e.values[2], c.trace(), 1e-12 * scale);
    EXPECT_NEAR(e.values[0] * e.values[1] * e.values[2], c.determinant(), 1e-12 * scale * scale * scale);
    EXPECT_GE(e.values[0], e.values[1]);
    EXPECT_GE(e.values[1], e.values[2]);
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR((c * e.vectors[k] - e.values[k] * e.vectors[k]).norm(), 0.0, 1e-10 * scale);
    }
  }
}

TEST(Eigen, FewerThanThreePointsAreDegenerate) {
  const std::vector<Vec3> pts = {Vec3::Zero(), Vec3::UnitX()};
  const auto e = eigen_of(pts);
  EXPECT_TRUE(e.degenerate());
  EXPECT_EQ(linearity(e), 0.0);
  EXPECT_EQ(verticality(e), 0.0);
}

TEST(Verticality, HorizontalAndVerticalPlanes) {
  std::vector<Vec3> floor;
  std::vector<Vec3> wall;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      floor.emplace_back(0.01 * i, 0.01 * j, 0.0);
      wall.emplace_back(0.01 * i, 0.0, 0.01 * j);
    }
  }
  EXPECT_NEAR(verticality(eigen_of(floor)), 0.0, 1e-9);
  EXPECT_NEAR(verticality(eigen_of(wall)), 1.0, 1e-9);
}

TEST(Features, NeighborCountsAndTrunkDistance) {
  std::mt19937_64 rng(5);
  const auto pts = testing::random_points(rng, 1500, 0.15);
  const PointCloud cloud = testing::cloud_from(pts);
  const CylinderModel trunk{Vec3(0.02, 0.0, 0.0), Vec3::UnitZ(), 0.05};
  const FeatureMatrix f = compute_all_features(cloud, trunk);
  ASSERT_EQ(f.cols(), static_cast<Eigen::Index>(kFeatureCount));
  const double radii[4] = {0.02, 0.04, 0.08, 0.15};
  for (std::size_t i = 0; i < pts.size(); i += 37) {
    for (int k = 0; k < 4; ++k) {
      int count = 0;
      for (const auto& q : pts) count += (q - pts[i]).squaredNorm() <= radii[k] * radii[k];
      EXPECT_EQ(f(static_cast<Eigen::Index>(i), k), count);
    }
    const Vec3 rel = pts[i] - trunk.axis_point;
    const double radial = std::hypot(rel.x(), rel.y());
    EXPECT_NEAR(f(static_cast<Eigen::Index>(i), 19), std::abs(radial - 0.05), 1e-12);
  }
}

TEST(Features, BatchRowsEqualSinglePointRowsAtAnyThreadCount) {
  std::mt19937_64 rng(6);
  const PointCloud cloud = testing::cloud_from(testing::random_points(rng, 600, 0.1));
  const CylinderModel trunk{Vec3::Zero(), Vec3::UnitZ(), 0.03};
  set_max_threads(1);
  const FeatureMatrix one = compute_all_features(cloud, trunk);
  set_max_threads(4);
  const FeatureMatrix four = compute_all_features(cloud, trunk);
  set_max_threads(1);
  EXPECT_TRUE(one == four);
  const SpatialIndex index(cloud);
  for (std::size_t i = 0; i < cloud.size(); i += 53) {
    const FeatureVector row = compute_feature_vector(index, cloud[i].position, trunk);
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      EXPECT_EQ(row[k], one(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))) << k;
    }
  }
}

TEST(Features, NamesAndEmptyInput) {
  EXPECT_EQ(feature_names().size(), kFeatureCount);
  EXPECT_EQ(feature_names().front(), "f1");
  EXPECT_THROW(compute_all_features(PointCloud{}, CylinderModel{}), DataError);
}

struct LabCase {
  int r, g, b;
  double L, a, bb;
};

TEST(Cielab, MatchesReferenceTriplets) {
  // Reference values from an independent sRGB/D65 implementation.
  const LabCase cases[] = {
      {255, 255, 255, 100.0, -0.0025, 0.0047},  {0, 0, 0, 0.0, 0.0, 0.0},
      {255, 0, 0, 53.2406, 80.0923, 67.2028},   {0, 255, 0, 87.7351, -86.1830, 83.1797},
      {0, 0, 255, 32.2957, 79.1856, -107.8573}, {128, 128, 128, 53.5850, -0.0015, 0.0028},
      {101, 67, 33, 31.5585, 10.8758, 26.1889}, {236, 241, 250, 95.0113, -0.0115, -4.8976},
      {12, 200, 90, 70.9552, -64.8201, 43.0652},
  };
  for (const auto& c : cases) {
    const Lab lab = rgb_to_cielab(c.r, c.g, c.b);
    EXPECT_NEAR(lab.L, c.L, 0.05) << c.r << "," << c.g << "," << c.b;
    EXPECT_NEAR(lab.a, c.a, 0.05) << c.r << "," << c.g << "," << c.b;
    EXPECT_NEAR(lab.b, c.bb, 0.05) << c.r << "," << c.g << "," << c.b;
  }
  EXPECT_THROW(rgb_to_cielab(256, 0, 0), ParameterError);
}

TEST(Cielab, GraysHaveNeutralChroma) {
  for (int v = 0; v <= 255; v += 5) {
    const Lab lab = rgb_to_cielab(v, v, v);
    EXPECT_NEAR(lab.a, 0.0, 0.05);
    EXPECT_NEAR(lab.b, 0.0, 0.05);
  }
}

}  // namespace
}  // namespace treeskel
