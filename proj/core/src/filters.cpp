// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "treeskel/error.hpp"
#include "treeskel/parallel.hpp"
#include "treeskel/spatial_index.hpp"

namespace treeskel {
namespace {

struct CellHash {
  std::size_t operator()(const VoxelCell& c) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(c[0]) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(c[1]) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(c[2]) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;  // smallest index is the root
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

VoxelCell voxel_of(const Vec3& p, double voxel_size) {
  return {static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.z() / voxel_size))};
}

std::vector<std::size_t> subsample_min_distance_indices(const PointCloud& cloud,
                                                        double min_distance) {
  if (!(min_distance > 0.0)) throw ParameterError("subsample distance must be positive");
  std::vector<std::size_t> visit(cloud.size());
  std::iota(visit.begin(), visit.end(), std::size_t{0});
  std::sort(visit.begin(), visit.end(), [&](std::size_t a, std::size_t b) {
    return cloud[a].source_id < cloud[b].source_id;
  });

  const double d2 = min_distance * min_distance;
  std::unordered_map<VoxelCell, std::vector<std::size_t>, CellHash> kept_by_cell;
  std::vector<std::size_t> kept;
  for (std::size_t i : visit) {
    const Vec3& p = cloud[i].position;
    const VoxelCell cell = voxel_of(p, min_distance);
    bool blocked = false;
    for (std::int64_t dx = -1; dx <= 1 && !blocked; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && !blocked; ++dy) {
        for (std::int64_t dz = -1; dz <= 1 && !blocked; ++dz) {
          const auto it = kept_by_cell.find({cell[0] + dx, cell[1] + dy, cell[2] + dz});
          if (it == kept_by_cell.end()) continue;
          for (std::size_t j : it->second) {
            if ((cloud[j].position - p).squaredNorm() < d2) {
              blocked = true;
              break;
            }
          }
        }
      }
    }
    if (!blocked) {
      kept_by_cell[cell].push_back(i);
      kept.push_back(i);
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

PointCloud subsample_min_distance(const PointCloud& cloud, double min_distance) {
  const auto kept = subsample_min_distance_indices(cloud, min_distance);
  return cloud.subset(kept);
}

std::vector<std::size_t> sor_filter_indices(const PointCloud& cloud, int k, double n_sigma) {
  if (k <= 0) throw ParameterError("SOR neighbor count must be positive");
  if (cloud.size() <= static_cast<std::size_t>(k)) {
    throw ParameterError("SOR needs more than k points");
  }
  const SpatialIndex index(cloud);
  std::vector<double> mean_dist(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    auto nn = index.knn(cloud[i].position, static_cast<std::size_t>(k) + 1);
    const auto self = std::find_if(nn.begin(), nn.end(),
                                   [&](const Neighbor& n) { return n.index == i; });
    nn.erase(self != nn.end() ? self : nn.end() - 1);
    double sum = 0.0;
    for (const auto& n : nn) sum += std::sqrt(n.dist2);
    mean_dist[i] = sum / static_cast<double>(nn.size());
  });

  const double n = static_cast<double>(mean_dist.size());
  const double mean = std::accumulate(mean_dist.begin(), mean_dist.end(), 0.0) / n;
  double var = 0.0;
  for (double m : mean_dist) var += (m - mean) * (m - mean);
  const double threshold = mean + n_sigma * std::sqrt(var / n);

  std::vector<std::size_t> kept;
  kept.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (mean_dist[i] <= threshold) kept.push_back(i);
  }
  return kept;
}

PointCloud sor_filter(const PointCloud& cloud, int k, double n_sigma) {
  const auto kept = sor_filter_indices(cloud, k, n_sigma);
  return cloud.subset(kept);
}

std::vector<std::vector<std::size_t>> connected_components(const PointCloud& cloud,
                                                           double link_radius) {
  if (!(link_radius > 0.0)) throw ParameterError("link radius must be positive");
  const SpatialIndex index(cloud);
  DisjointSets sets(cloud.size());
  std::vector<Neighbor> found;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    index.radius(cloud[i].position, link_radius, found);
    for (const auto& n : found) {
      if (n.index > i) sets.unite(i, n.index);
    }
  }

  std::unordered_map<std::size_t, std::size_t> slot_of_root;
  std::vector<std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t root = sets.find(i);
    auto [it, inserted] = slot_of_root.try_emplace(root, components.size());
    if (inserted) components.emplace_back();
    components[it->second].push_back(i);
  }
  // Components were created in order of their smallest member.
  std::stable_sort(components.begin(), components.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return components;
}

PointCloud keep_largest_component(const PointCloud& cloud, double link_radius) {
  if (cloud.empty()) return cloud;
  const auto components = connected_components(cloud, link_radius);
  return cloud.subset(components.front());
}

VoxelGrid voxelize(const std::vector<Vec3>& positions, double voxel_size) {
  if (!(voxel_size > 0.0)) throw ParameterError("voxel size must be positive");
  VoxelGrid grid;
  grid.voxel_size = voxel_size;
  grid.occupied.reserve(positions.size());
  for (const auto& p : positions) grid.occupied.push_back(voxel_of(p, voxel_size));
  std::sort(grid.occupied.begin(), grid.occupied.end());
  grid.occupied.erase(std::unique(grid.occupied.begin(), grid.occupied.end()),
                      grid.occupied.end());
  return grid;
}

VoxelGrid voxelize(const PointCloud& cloud, double voxel_size) {
  return voxelize(cloud.positions(), voxel_size);
}

}  // namespace treeskel
