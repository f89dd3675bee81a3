// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeskel/geometry.hpp"
#include "treeskel/kmeans.hpp"
#include "treeskel/point_cloud.hpp"

namespace treeskel {

enum class NodeKind { trunk, branch };

/// A trunk slice or a k-means branch cluster. Members index the cloud the
/// skeleton was built from.
struct ClusterNode {
  int id = 0;
  NodeKind kind = NodeKind::branch;
  Vec3 centroid = Vec3::Zero();
  std::vector<std::size_t> members;
  std::optional<int> slice_index;
};

Vec3 centroid_of(std::span<const Vec3> positions, std::span<const std::size_t> members);

/// Points within `max_surface_distance` of the cylinder surface, reduced to
/// the component (hops <= link_radius) that holds the lowest candidate.
/// Throws FitError when no point qualifies.
std::vector<std::size_t> extract_trunk_points(const PointCloud& cloud, const CylinderModel& cylinder,
                                              double max_surface_distance,
                                              double link_radius = 0.02);

struct TrunkSlices {
  double slice_height = 0.0;  ///< equals the cylinder radius
  double z_min = 0.0;
  std::vector<ClusterNode> nodes;  ///< ids 0..n-1 in slice order
};

/// Horizontal slabs [z_min + k h, z_min + (k+1) h) with h = cylinder radius.
/// Empty slabs produce no node.
TrunkSlices slice_trunk(const PointCloud& cloud, std::span<const std::size_t> trunk_points,
                        const CylinderModel& cylinder);

/// max(1, round(clusters_per_100 * occupied voxels / 100)).
std::size_t cluster_count(std::size_t occupied_voxels, double clusters_per_100 = 2.0);
std::size_t cluster_count(const PointCloud& cloud, std::span<const std::size_t> members,
                          double voxel_size = 0.01, double clusters_per_100 = 2.0);

/// k-means over the member positions; node ids start at `first_id` and
/// follow the cluster order, members ascend.
std::vector<ClusterNode> kmeans_branches(const PointCloud& cloud,
                                         std::span<const std::size_t> members, std::size_t k,
                                         const KMeansParams& params, int first_id);

/// Symmetric sparse graph over node ids 0..n-1 with positive weights.
class WeightedAdjacency {
 public:
  explicit WeightedAdjacency(std::size_t n = 0) : neighbors_(n) {}

  std::size_t size() const noexcept { return neighbors_.size(); }
  /// Sets (or lowers) the weight of u-v. Zero weights are stored as the
  /// smallest positive double so every stored weight stays > 0.
  void add_edge(int u, int v, double w);
  std::optional<double> weight(int u, int v) const;
  /// Neighbors of u sorted by id.
  const std::vector<std::pair<int, double>>& neighbors(int u) const { return neighbors_.at(u); }
  std::size_t edge_count() const;

 private:
  std::vector<std::vector<std::pair<int, double>>> neighbors_;
};

/// Weight of u-v = minimum distance between a member of u and a member of v;
/// pairs farther apart than edge_max get no edge. Node ids must be 0..n-1.
WeightedAdjacency build_adjacency(std::span<const Vec3> positions,
                                  const std::vector<ClusterNode>& nodes, double edge_max);

struct ShortestPathTree {
  int source = 0;
  std::vector<int> parent;    ///< -1 for the source and unreachable nodes
  std::vector<double> cost;   ///< +inf when unreachable
  bool reached(int v) const { return cost[static_cast<std::size_t>(v)] < kUnreached; }
  static constexpr double kUnreached = std::numeric_limits<double>::infinity();
};

/// Dijkstra from `source`. Nodes in `blocked` (other than the source) are
/// never entered. Equal-cost alternatives keep the lower parent id.
ShortestPathTree dijkstra(const WeightedAdjacency& adj, int source,
                          const std::vector<char>& blocked = {});

/// One tree per trunk node; every run blocks the other trunk nodes.
std::vector<ShortestPathTree> shortest_path_trees(const WeightedAdjacency& adj,
                                                  std::span<const int> trunk_ids);

struct SkeletonEdge {
  int child = 0;
  int parent = 0;
  double length = 0.0;
};

/// Rooted tree over cluster nodes. `nodes` ascend by id; `parent[i]` is the
/// parent id of nodes[i] (-1 for the root).
struct SkeletonGraph {
  std::vector<ClusterNode> nodes;
  std::vector<int> parent;
  std::vector<double> edge_length;  ///< length of the edge to the parent
  std::vector<double> path_cost;    ///< graph distance to the owning trunk node
  int root_id = -1;
  std::vector<int> leftover;  ///< branch node ids no trunk node reaches

  std::size_t index_of(int id) const;  ///< throws DataError for unknown ids
  const ClusterNode& node(int id) const { return nodes[index_of(id)]; }
  std::vector<SkeletonEdge> edges() const;
  std::vector<int> children(int id) const;
  /// Throws DataError unless the graph is a single tree rooted at root_id
  /// with a vertical trunk chain.
  void validate() const;
};

/// Keeps, for every branch node, the parent from the tree with the smallest
/// path cost (ties to the lower slice index), chains trunk nodes by slice
/// index and roots the graph at the lowest slice.
SkeletonGraph merge_graphs(const std::vector<ShortestPathTree>& trees,
                           const WeightedAdjacency& adj, std::vector<ClusterNode> nodes);

/// Per-point branch ids: 0 trunk, 1..lb_count leading branches (descending
/// size), lb_count + 1 small trunk branches, -1 rest.
struct BranchLabeling {
  std::vector<int> branch_id;
  int lb_count = 0;

  static constexpr int kTrunk = 0;
  static constexpr int kRest = -1;
  int sb_id() const noexcept { return lb_count + 1; }
};

/// Subtrees hanging off trunk nodes with at least lb_min_fraction of the
/// `n_points` cloud points become leading branches; the rest are SB.
/// Per-node labels are written to `node_labels` when given.
BranchLabeling assign_branch_labels(const SkeletonGraph& graph, std::size_t n_points,
                                    double lb_min_fraction,
                                    std::vector<int>* node_labels = nullptr);

struct SkeletonParams {
  double trunk_distance = 0.05;
  double trunk_link_radius = 0.02;
  double voxel_size = 0.01;
  double clusters_per_100_voxels = 2.0;
  double edge_max = 0.03;
  double lb_min_fraction = 0.05;
  KMeansParams kmeans;
};

struct SkeletonResult {
  SkeletonGraph graph;
  BranchLabeling labels;
  std::vector<int> node_labels;  ///< aligned with graph.nodes
  double slice_height = 0.0;
  std::size_t branch_clusters = 0;
};

/// Full graph construction on a cloud of major-branch points.
SkeletonResult build_skeleton(const PointCloud& cloud, const CylinderModel& trunk,
                              const SkeletonParams& params);

/// `lb_count` is written when non-negative.
nlohmann::ordered_json skeleton_to_json(const SkeletonGraph& graph,
                                        const std::vector<int>& node_labels = {},
                                        int lb_count = -1);
std::string skeleton_to_dot(const SkeletonGraph& graph, const std::vector<int>& node_labels = {});

}  // namespace treeskel
