// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "treeskel/spatial_index.hpp"

namespace treeskel {
namespace {

std::vector<std::size_t> brute_radius(const std::vector<Vec3>& pts, const Vec3& q, double r) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if ((pts[i] - q).squaredNorm() <= r * r) out.push_back(i);
  }
  return out;
}

TEST(SpatialIndex, RadiusMatchesBruteForce) {
  std::mt19937_64 rng(42);
  for (int instance = 0; instance < 60; ++instance) {
    const std::size_t n = 1 + rng() % 2000;
    const auto pts = testing::random_points(rng, n, 1.0);
    const SpatialIndex index(pts);
    std::uniform_real_distribution<double> radius(0.0, 0.4);
    for (int q = 0; q < 20; ++q) {
      // Alternate between free queries and queries centred on a data point.
      const Vec3 query = q % 2 ? pts[rng() % n] : testing::random_points(rng, 1, 1.2)[0];
      const double r = radius(rng);
      ASSERT_EQ(index.radius(query, r), brute_radius(pts, query, r));
      EXPECT_EQ(index.count_within(query, r), brute_radius(pts, query, r).size());
    }
  }
}

TEST(SpatialIndex, RadiusIsInclusiveAtTheBoundary) {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0.5, 0, 0), Vec3(1.0, 0, 0)};
  const SpatialIndex index(pts);
  EXPECT_EQ(index.radius(Vec3::Zero(), 0.5), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(index.radius(Vec3::Zero(), 0.0), (std::vector<std::size_t>{0}));
}

TEST(SpatialIndex, KnnMatchesSortedBruteForce) {
  std::mt19937_64 rng(7);
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t n = 1 + rng() % 800;
    auto pts = testing::random_points(rng, n, 1.0);
    // Exact duplicates exercise the index tie-break.
    for (std::size_t i = 0; i + 1 < n && i < 10; i += 3) pts[i + 1] = pts[i];
    const SpatialIndex index(pts);
    const Vec3 q = testing::random_points(rng, 1, 1.0)[0];
    const std::size_t k = 1 + rng() % 12;
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < n; ++i) all.emplace_back((pts[i] - q).squaredNorm(), i);
    std::sort(all.begin(), all.end());
    const auto got = index.knn(q, k);
    ASSERT_EQ(got.size(), std::min(k, n));
    for (std::size_t j = 0; j < got.size(); ++j) {
      EXPECT_EQ(got[j].index, all[j].second);
      EXPECT_EQ(got[j].dist2, all[j].first);
    }
  }
}

TEST(SpatialIndex, EmptyIndexAnswersNothing) {
  const SpatialIndex index(std::vector<Vec3>{});
  EXPECT_TRUE(index.radius(Vec3::Zero(), 1.0).empty());
  EXPECT_TRUE(index.knn(Vec3::Zero(), 3).empty());
}

}  // namespace
}  // namespace treeskel
