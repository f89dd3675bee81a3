// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "treeskel/point_cloud.hpp"

namespace treeskel {

/// Greedy Poisson-disk thinning. Points are visited in ascending source_id;
/// a point is kept when no kept point lies closer than `min_distance`.
/// Returns indices of kept points in cloud order.
std::vector<std::size_t> subsample_min_distance_indices(const PointCloud& cloud,
                                                        double min_distance);
PointCloud subsample_min_distance(const PointCloud& cloud, double min_distance);

/// Statistical outlier removal on the mean distance to the k nearest
/// neighbors; keeps points whose mean <= global mean + n_sigma * std.
std::vector<std::size_t> sor_filter_indices(const PointCloud& cloud, int k, double n_sigma);
PointCloud sor_filter(const PointCloud& cloud, int k, double n_sigma);

/// Partition into single-linkage components with hop length <= link_radius.
/// Components are sorted by descending size (ties by smallest member); each
/// component lists cloud indices in ascending order.
std::vector<std::vector<std::size_t>> connected_components(const PointCloud& cloud,
                                                           double link_radius);
PointCloud keep_largest_component(const PointCloud& cloud, double link_radius);

using VoxelCell = std::array<std::int64_t, 3>;

struct VoxelGrid {
  double voxel_size = 0.0;
  std::vector<VoxelCell> occupied;  ///< sorted, unique

  std::size_t occupied_count() const noexcept { return occupied.size(); }
};

VoxelCell voxel_of(const Vec3& p, double voxel_size);
VoxelGrid voxelize(const PointCloud& cloud, double voxel_size);
VoxelGrid voxelize(const std::vector<Vec3>& positions, double voxel_size);

}  // namespace treeskel
