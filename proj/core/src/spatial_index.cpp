// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/spatial_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

#include "treeskel/error.hpp"

namespace treeskel {
namespace {

constexpr std::uint32_t kLeafSize = 12;

}  // namespace

SpatialIndex::SpatialIndex(const PointCloud& cloud) : SpatialIndex(cloud.positions()) {}

SpatialIndex::SpatialIndex(std::vector<Vec3> positions) : positions_(std::move(positions)) {
  if (positions_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw ParameterError("spatial index supports at most 2^32-1 points");
  }
  order_.resize(positions_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!positions_.empty()) {
    nodes_.reserve(2 * positions_.size() / kLeafSize + 1);
    build(0, static_cast<std::uint32_t>(positions_.size()));
  }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end, -1, -1, -1, 0.0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(positions_[order_[i]]);
    hi = hi.cwiseMax(positions_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return positions_[a][axis] < positions_[b][axis];
                   });
  const double split = positions_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void SpatialIndex::radius(const Vec3& query, double r, std::vector<Neighbor>& out) const {
  out.clear();
  if (nodes_.empty() || r < 0.0) return;
  const double r2 = r * r;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double d2 = (positions_[idx] - query).squaredNorm();
        if (d2 <= r2) out.push_back({idx, d2});
      }
      continue;
    }
    // Left holds coordinates <= split, right holds coordinates >= split.
    const double diff = query[node.axis] - node.split;
    if (diff <= r) stack[top++] = node.left;
    if (diff >= -r) stack[top++] = node.right;
  }
  std::sort(out.begin(), out.end(),
            [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
}

std::vector<std::size_t> SpatialIndex::radius(const Vec3& query, double r) const {
  std::vector<Neighbor> found;
  radius(query, r, found);
  std::vector<std::size_t> out;
  out.reserve(found.size());
  for (const auto& n : found) out.push_back(n.index);
  return out;
}

std::size_t SpatialIndex::count_within(const Vec3& query, double r) const {
  std::vector<Neighbor> found;
  radius(query, r, found);
  return found.size();
}

std::vector<Neighbor> SpatialIndex::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> out;
  if (k == 0 || nodes_.empty()) return out;
  auto worse = [](const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  };
  // Max-heap on (dist2, index): top is the current worst of the best k.
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(worse)> heap(worse);
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Neighbor cand{order_[i], (positions_[order_[i]] - query).squaredNorm()};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (worse(cand, heap.top())) {
          heap.pop();
          heap.push(cand);
        }
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far = diff <= 0.0 ? node.right : node.left;
    // The k-th distance only shrinks, so pruning the far side here is safe.
    if (heap.size() < k || diff * diff <= heap.top().dist2) stack[top++] = far;
    stack[top++] = near;
  }
  out.resize(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top();
    heap.pop();
  }
  return out;
}

}  // namespace treeskel
