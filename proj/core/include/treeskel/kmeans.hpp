// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "treeskel/point_cloud.hpp"

namespace treeskel {

struct KMeansParams {
  int restarts = 5;
  int max_iterations = 100;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<Vec3> centroids;
  std::vector<int> assignment;  ///< cluster of each input point
  double inertia = 0.0;         ///< within-cluster sum of squared distances
  int iterations = 0;
  bool converged = false;
};

/// k-means++ seeding: first center uniform, then proportional to the squared
/// distance to the nearest chosen center.
std::vector<Vec3> kmeans_plus_plus(std::span<const Vec3> points, std::size_t k,
                                   std::uint64_t seed);

/// Lloyd iterations from the given centers until the assignment is a fixed
/// point or `max_iterations` is reached. Uses Hamerly bounds to skip
/// distance evaluations; assignments equal those of plain Lloyd (nearest
/// center, lowest index on ties). Empty clusters are reseeded with the point
/// farthest from its center, so every returned cluster is non-empty.
KMeansResult lloyd(std::span<const Vec3> points, std::vector<Vec3> centers, int max_iterations);

/// Best of `params.restarts` seeded runs by inertia (lowest restart on ties).
/// Throws ParameterError when k is 0 or exceeds the number of points.
KMeansResult kmeans(std::span<const Vec3> points, std::size_t k, const KMeansParams& params);

}  // namespace treeskel
