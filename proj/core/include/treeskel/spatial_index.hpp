// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "treeskel/point_cloud.hpp"

namespace treeskel {

struct Neighbor {
  std::size_t index = 0;
  double dist2 = 0.0;  ///< squared Euclidean distance to the query
};

/// Static k-d tree over a fixed set of positions.
///
/// A radius query returns exactly the points p with ||p - q||^2 <= r^2,
/// ordered by ascending index. Queries are const and safe to run
/// concurrently.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::vector<Vec3> positions);
  explicit SpatialIndex(const PointCloud& cloud);

  std::size_t size() const noexcept { return positions_.size(); }
  const Vec3& position(std::size_t i) const { return positions_[i]; }

  std::vector<std::size_t> radius(const Vec3& query, double r) const;

  /// Clears `out` and fills it with neighbors within r, ascending index.
  void radius(const Vec3& query, double r, std::vector<Neighbor>& out) const;

  std::size_t count_within(const Vec3& query, double r) const;

  /// The k nearest points ordered by (distance, index).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = -1;  ///< -1 marks a leaf
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> positions_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace treeskel
