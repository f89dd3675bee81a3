// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "treeskel/error.hpp"
#include "treeskel/parallel.hpp"
#include "treeskel/skeleton.hpp"
#include "treeskel/stages.hpp"
#include "treeskel/synthetic.hpp"

namespace treeskel {
namespace {

using testing::random_points;

std::vector<ClusterNode> random_partition(std::mt19937_64& rng, std::size_t n_points,
                                          std::size_t n_nodes) {
  std::vector<ClusterNode> nodes(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) nodes[i].id = static_cast<int>(i);
  for (std::size_t p = 0; p < n_points; ++p) nodes[rng() % n_nodes].members.push_back(p);
  return nodes;
}

TEST(Adjacency, MatchesAllPairsMinimumDistance) {
  std::mt19937_64 rng(1);
  for (int instance = 0; instance < 60; ++instance) {
    const std::size_t n = 20 + rng() % 300;
    const auto pts = random_points(rng, n, 0.3);
    const auto nodes = random_partition(rng, n, 2 + rng() % 30);
    const double edge_max = 0.02 + 0.08 * std::uniform_real_distribution<double>()(rng);
    const WeightedAdjacency adj = build_adjacency(pts, nodes, edge_max);
    std::size_t expected_edges = 0;
    for (std::size_t u = 0; u < nodes.size(); ++u) {
      for (std::size_t v = 0; v < nodes.size(); ++v) {
        if (u == v) continue;
        double best = std::numeric_limits<double>::infinity();
        for (auto a : nodes[u].members) {
          for (auto b : nodes[v].members) best = std::min(best, (pts[a] - pts[b]).squaredNorm());
        }
        const auto w = adj.weight(static_cast<int>(u), static_cast<int>(v));
        if (std::sqrt(best) <= edge_max) {
          ASSERT_TRUE(w.has_value()) << instance;
          EXPECT_DOUBLE_EQ(*w, std::sqrt(best));
          if (u < v) ++expected_edges;
        } else {
          EXPECT_FALSE(w.has_value()) << instance;
        }
      }
    }
    EXPECT_EQ(adj.edge_count(), expected_edges);
  }
}

TEST(Adjacency, RejectsMisnumberedNodes) {
  std::vector<ClusterNode> nodes(1);
  nodes[0].id = 3;
  const std::vector<Vec3> pts;
  EXPECT_THROW(build_adjacency(pts, nodes, 0.1), DataError);
  WeightedAdjacency adj(2);
  EXPECT_THROW(adj.add_edge(1, 1, 1.0), ParameterError);
  adj.add_edge(0, 1, 0.0);
  EXPECT_GT(*adj.weight(1, 0), 0.0);
  adj.add_edge(0, 1, 2.0);
  EXPECT_GT(*adj.weight(0, 1), 0.0);
  EXPECT_LT(*adj.weight(0, 1), 1e-300);
}

/// Integer weights make every path sum exact, so ties are real ties.
WeightedAdjacency random_graph(std::mt19937_64& rng, std::size_t n, double density) {
  WeightedAdjacency adj(n);
  std::bernoulli_distribution has(density);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (has(rng)) adj.add_edge(static_cast<int>(u), static_cast<int>(v), static_cast<double>(1 + rng() % 4));
    }
  }
  return adj;
}

/// Bellman-Ford to a fixed point; parent = lowest-id tight predecessor.
ShortestPathTree bellman_ford(const WeightedAdjacency& adj, int source, const std::vector<char>& blocked) {
  const std::size_t n = adj.size();
  ShortestPathTree t;
  t.source = source;
  t.cost.assign(n, ShortestPathTree::kUnreached);
  t.parent.assign(n, -1);
  t.cost[static_cast<std::size_t>(source)] = 0.0;
  auto enterable = [&](int v) { return v == source || blocked.empty() || !blocked[static_cast<std::size_t>(v)]; };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t u = 0; u < n; ++u) {
      if (!enterable(static_cast<int>(u)) || t.cost[u] == ShortestPathTree::kUnreached) continue;
      for (const auto& [v, w] : adj.neighbors(static_cast<int>(u))) {
        if (!enterable(v)) continue;
        if (t.cost[u] + w < t.cost[static_cast<std::size_t>(v)]) {
          t.cost[static_cast<std::size_t>(v)] = t.cost[u] + w;
          changed = true;
        }
      }
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (static_cast<int>(v) == source || t.cost[v] == ShortestPathTree::kUnreached) continue;
    for (const auto& [u, w] : adj.neighbors(static_cast<int>(v))) {
      if (!enterable(u) || !enterable(static_cast<int>(v))) continue;
      if (t.cost[static_cast<std::size_t>(u)] + w == t.cost[v]) {
        t.parent[v] = u;
        break;
      }
    }
  }
  return t;
}

TEST(Dijkstra, MatchesBellmanFord) {
  std::mt19937_64 rng(2);
  for (int instance = 0; instance < 80; ++instance) {
    const std::size_t n = 2 + rng() % 60;
    const WeightedAdjacency adj = random_graph(rng, n, 0.02 + 0.2 * std::uniform_real_distribution<double>()(rng));
    std::vector<char> blocked;
    if (instance % 2) {
      blocked.assign(n, 0);
      for (auto& b : blocked) b = rng() % 5 == 0;
    }
    const int source = static_cast<int>(rng() % n);
    const ShortestPathTree fast = dijkstra(adj, source, blocked);
    const ShortestPathTree slow = bellman_ford(adj, source, blocked);
    ASSERT_EQ(fast.cost, slow.cost) << instance;
    ASSERT_EQ(fast.parent, slow.parent) << instance;
  }
}

TEST(Dijkstra, TreesAreThreadIndependent) {
  std::mt19937_64 rng(3);
  const WeightedAdjacency adj = random_graph(rng, 200, 0.03);
  const std::vector<int> trunk = {0, 5, 9, 13};
  set_max_threads(1);
  const auto a = shortest_path_trees(adj, trunk);
  set_max_threads(4);
  const auto b = shortest_path_trees(adj, trunk);
  set_max_threads(1);
  for (std::size_t t = 0; t < trunk.size(); ++t) {
    EXPECT_EQ(a[t].parent, b[t].parent);
    EXPECT_EQ(a[t].cost, b[t].cost);
    for (int other : trunk) {
      if (other != trunk[t]) EXPECT_FALSE(a[t].reached(other));
    }
  }
}

ClusterNode make_node(int id, NodeKind kind, std::optional<int> slice, std::size_t first, std::size_t count) {
  ClusterNode n;
  n.id = id;
  n.kind = kind;
  n.slice_index = slice;
  n.centroid = Vec3(0, 0, 0.1 * id);
  for (std::size_t i = 0; i < count; ++i) n.members.push_back(first + i);
  return n;
}

TEST(Merge, SmallestCostOwnerWithLowerSliceOnTies) {
  std::vector<ClusterNode> nodes = {
      make_node(0, NodeKind::trunk, 0, 0, 1), make_node(1, NodeKind::trunk, 1, 1, 1),
      make_node(2, NodeKind::branch, {}, 2, 1), make_node(3, NodeKind::branch, {}, 3, 1),
      make_node(4, NodeKind::branch, {}, 4, 1), make_node(5, NodeKind::branch, {}, 5, 1)};
  WeightedAdjacency adj(6);
  adj.add_edge(0, 1, 1.0);
  adj.add_edge(2, 0, 1.0);
  adj.add_edge(2, 1, 1.0);
  adj.add_edge(3, 2, 1.5);
  adj.add_edge(5, 1, 0.5);
  adj.add_edge(5, 2, 0.75);
  const std::vector<int> trunk = {0, 1};
  const auto trees = shortest_path_trees(adj, trunk);
  const SkeletonGraph g = merge_graphs(trees, adj, nodes);
  EXPECT_EQ(g.root_id, 0);
  EXPECT_EQ(g.parent, (std::vector<int>{-1, 0, 0, 2, 1}));
  EXPECT_EQ(g.leftover, (std::vector<int>{4}));
  EXPECT_DOUBLE_EQ(g.path_cost[g.index_of(3)], 2.5);
  EXPECT_DOUBLE_EQ(g.edge_length[g.index_of(3)], 1.5);
  EXPECT_DOUBLE_EQ(g.edge_length[g.index_of(1)], 0.1);
  EXPECT_EQ(g.children(0), (std::vector<int>{1, 2}));
  EXPECT_NO_THROW(g.validate());
  EXPECT_THROW(g.index_of(4), DataError);
}

TEST(Graph, ValidateRejectsBrokenTrees) {
  SkeletonGraph g;
  g.nodes = {make_node(0, NodeKind::trunk, 0, 0, 1), make_node(1, NodeKind::branch, {}, 1, 1),
             make_node(2, NodeKind::branch, {}, 2, 1)};
  g.parent = {-1, 2, 1};
  g.edge_length = g.path_cost = {0, 1, 1};
  g.root_id = 0;
  EXPECT_THROW(g.validate(), DataError);
  g.parent = {-1, 0, 1};
  EXPECT_NO_THROW(g.validate());
  g.nodes[0].kind = NodeKind::branch;
  EXPECT_THROW(g.validate(), DataError);
}

TEST(Labels, LeadingBranchesBySubtreeSize) {
  SkeletonGraph g;
  g.nodes = {make_node(0, NodeKind::trunk, 0, 0, 10), make_node(1, NodeKind::trunk, 1, 10, 10),
             make_node(2, NodeKind::branch, {}, 20, 10), make_node(3, NodeKind::branch, {}, 30, 10),
             make_node(4, NodeKind::branch, {}, 40, 25), make_node(5, NodeKind::branch, {}, 65, 5)};
  g.parent = {-1, 0, 0, 2, 1, 1};
  g.edge_length = g.path_cost = std::vector<double>(6, 1.0);
  g.root_id = 0;
  std::vector<int> node_labels;
  const BranchLabeling l = assign_branch_labels(g, 80, 0.1, &node_labels);
  EXPECT_EQ(l.lb_count, 2);
  EXPECT_EQ(node_labels, (std::vector<int>{0, 0, 2, 2, 1, 3}));
  EXPECT_EQ(l.branch_id[0], BranchLabeling::kTrunk);
  EXPECT_EQ(l.branch_id[45], 1);
  EXPECT_EQ(l.branch_id[35], 2);
  EXPECT_EQ(l.branch_id[66], l.sb_id());
  EXPECT_EQ(l.branch_id[79], BranchLabeling::kRest);
  EXPECT_THROW(assign_branch_labels(g, 80, 1.5), ParameterError);
}

TEST(Trunk, SliceHeightEqualsRadiusAndSlabsPartition) {
  std::mt19937_64 rng(4);
  for (int instance = 0; instance < 20; ++instance) {
    CylinderModel c;
    c.radius = 0.02 + 0.1 * std::uniform_real_distribution<double>()(rng);
    std::vector<Vec3> pts;
    std::uniform_real_distribution<double> angle(0.0, 6.283185307179586), z(0.0, 1.5);
    for (int i = 0; i < 2000; ++i) {
      const double a = angle(rng);
      pts.emplace_back(c.radius * std::cos(a), c.radius * std::sin(a), z(rng));
    }
    const PointCloud cloud = testing::cloud_from(pts);
    const auto trunk = extract_trunk_points(cloud, c, 0.05, 0.2);
    EXPECT_EQ(trunk.size(), pts.size());
    const TrunkSlices s = slice_trunk(cloud, trunk, c);
    EXPECT_EQ(s.slice_height, c.radius);
    std::size_t covered = 0;
    for (std::size_t k = 0; k < s.nodes.size(); ++k) {
      const auto& node = s.nodes[k];
      EXPECT_EQ(node.id, static_cast<int>(k));
      if (k > 0) EXPECT_GT(*node.slice_index, *s.nodes[k - 1].slice_index);
      for (auto m : node.members) {
        const double lo = s.z_min + *node.slice_index * s.slice_height;
        EXPECT_GE(pts[m].z(), lo - 1e-12);
        EXPECT_LT(pts[m].z(), lo + s.slice_height + 1e-12);
      }
      covered += node.members.size();
    }
    EXPECT_EQ(covered, pts.size());
  }
}

TEST(Trunk, ExtractionKeepsTheComponentOfTheLowestPoint) {
  CylinderModel c;
  c.radius = 0.05;
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(0.05, 0.0, 0.01 * i);
  for (int i = 0; i < 80; ++i) pts.emplace_back(-0.05, 0.0, 2.0 + 0.01 * i);
  pts.emplace_back(1.0, 0.0, 0.0);
  const auto trunk = extract_trunk_points(testing::cloud_from(pts), c, 0.01);
  EXPECT_EQ(trunk.size(), 50u);
  EXPECT_THROW(extract_trunk_points(testing::cloud_from({Vec3(3, 0, 0)}), c, 0.01), FitError);
}

TEST(Clusters, CountRule) {
  EXPECT_EQ(cluster_count(0), 1u);
  EXPECT_EQ(cluster_count(25), 1u);
  EXPECT_EQ(cluster_count(75), 2u);
  EXPECT_EQ(cluster_count(1000), 20u);
  EXPECT_EQ(cluster_count(1000, 5.0), 50u);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.emplace_back(0.005 + 0.01 * i, 0.005, 0.005);
  std::vector<std::size_t> all(pts.size());
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(cluster_count(testing::cloud_from(pts), all), 6u);
}

PointCloud major_points(const GroundTruth& truth) {
  const auto& cls = truth.cloud.int_field(kClassField);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] == static_cast<std::int64_t>(PointClass::major)) keep.push_back(i);
  }
  return truth.cloud.subset(keep);
}

TEST(Skeleton, BuildsValidTreeOnSyntheticMajorBranches) {
  TreeSpec spec;
  spec.seed = 5;
  spec.point_density = 30000.0;
  const GroundTruth truth = generate_tree(spec);
  const PointCloud cloud = major_points(truth);
  const Segment& stem = truth.segments.front();
  CylinderModel trunk{stem.start, stem.dir, stem.radius};
  SkeletonParams params;
  params.kmeans.seed = 3;
  set_max_threads(1);
  const SkeletonResult a = build_skeleton(cloud, trunk, params);
  set_max_threads(4);
  const SkeletonResult b = build_skeleton(cloud, trunk, params);
  set_max_threads(1);
  EXPECT_NO_THROW(a.graph.validate());
  EXPECT_EQ(a.slice_height, trunk.radius);
  EXPECT_EQ(skeleton_to_json(a.graph, a.node_labels, a.labels.lb_count).dump(),
            skeleton_to_json(b.graph, b.node_labels, b.labels.lb_count).dump());
  EXPECT_EQ(a.labels.lb_count, spec.leading_branch_count);
  std::vector<int> owner(cloud.size(), 0);
  for (const auto& n : a.graph.nodes) {
    for (auto m : n.members) ++owner[m];
  }
  EXPECT_TRUE(std::all_of(owner.begin(), owner.end(), [](int c) { return c <= 1; }));
  const std::string dot = skeleton_to_dot(a.graph, a.node_labels);
  EXPECT_EQ(static_cast<std::size_t>(std::count(dot.begin(), dot.end(), '>')),
            a.graph.nodes.size() - 1);
}

}  // namespace
}  // namespace treeskel
