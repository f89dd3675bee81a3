// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>

#include "treeskel/cloud_io.hpp"
#include "treeskel/error.hpp"
#include "treeskel/filters.hpp"
#include "treeskel/parallel.hpp"
#include "treeskel/spatial_index.hpp"

namespace treeskel {

Vec3 centroid_of(std::span<const Vec3> positions, std::span<const std::size_t> members) {
  Vec3 sum = Vec3::Zero();
  for (std::size_t i : members) sum += positions[i];
  return members.empty() ? sum : Vec3(sum / static_cast<double>(members.size()));
}

std::vector<std::size_t> extract_trunk_points(const PointCloud& cloud, const CylinderModel& cylinder,
                                              double max_surface_distance, double link_radius) {
  if (!(max_surface_distance > 0.0) || !(link_radius > 0.0)) {
    throw ParameterError("trunk distance and link radius must be positive");
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (point_cylinder_distance(cloud[i].position, cylinder) <= max_surface_distance) {
      candidates.push_back(i);
    }
  }
  if (candidates.empty()) throw FitError("no points lie near the trunk cylinder");

  std::size_t lowest = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (cloud[candidates[c]].position.z() < cloud[candidates[lowest]].position.z()) lowest = c;
  }
  const PointCloud near = cloud.subset(candidates);
  for (const auto& component : connected_components(near, link_radius)) {
    if (!std::binary_search(component.begin(), component.end(), lowest)) continue;
    std::vector<std::size_t> out;
    out.reserve(component.size());
    for (std::size_t c : component) out.push_back(candidates[c]);
    return out;
  }
  return {};  // unreachable: components partition the candidates
}

TrunkSlices slice_trunk(const PointCloud& cloud, std::span<const std::size_t> trunk_points,
                        const CylinderModel& cylinder) {
  if (trunk_points.empty()) throw FitError("trunk point set is empty");
  if (!(cylinder.radius > 0.0)) throw ParameterError("cylinder radius must be positive");
  TrunkSlices out;
  out.slice_height = cylinder.radius;
  out.z_min = cloud[trunk_points[0]].position.z();
  for (std::size_t i : trunk_points) out.z_min = std::min(out.z_min, cloud[i].position.z());

  std::map<long long, std::vector<std::size_t>> slabs;
  for (std::size_t i : trunk_points) {
    const auto k = static_cast<long long>(
        std::floor((cloud[i].position.z() - out.z_min) / out.slice_height));
    slabs[k].push_back(i);
  }
  const auto positions = cloud.positions();
  for (auto& [k, members] : slabs) {
    std::sort(members.begin(), members.end());
    ClusterNode node;
    node.id = static_cast<int>(out.nodes.size());
    node.kind = NodeKind::trunk;
    node.centroid = centroid_of(positions, members);
    node.members = std::move(members);
    node.slice_index = static_cast<int>(k);
    out.nodes.push_back(std::move(node));
  }
  return out;
}

std::size_t cluster_count(std::size_t occupied_voxels, double clusters_per_100) {
  if (!(clusters_per_100 > 0.0)) throw ParameterError("clusters per 100 voxels must be positive");
  const auto k = std::llround(clusters_per_100 * static_cast<double>(occupied_voxels) / 100.0);
  return static_cast<std::size_t>(std::max<long long>(1, k));
}

std::size_t cluster_count(const PointCloud& cloud, std::span<const std::size_t> members,
                          double voxel_size, double clusters_per_100) {
  std::vector<Vec3> positions;
  positions.reserve(members.size());
  for (std::size_t i : members) positions.push_back(cloud[i].position);
  return cluster_count(voxelize(positions, voxel_size).occupied_count(), clusters_per_100);
}

std::vector<ClusterNode> kmeans_branches(const PointCloud& cloud,
                                         std::span<const std::size_t> members, std::size_t k,
                                         const KMeansParams& params, int first_id) {
  std::vector<Vec3> positions;
  positions.reserve(members.size());
  for (std::size_t i : members) positions.push_back(cloud[i].position);
  const KMeansResult result = kmeans(positions, k, params);

  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t m = 0; m < members.size(); ++m) {
    groups[static_cast<std::size_t>(result.assignment[m])].push_back(members[m]);
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  const auto all = cloud.positions();
  std::vector<ClusterNode> nodes;
  nodes.reserve(k);
  for (auto& g : groups) {
    ClusterNode node;
    node.id = first_id + static_cast<int>(nodes.size());
    node.kind = NodeKind::branch;
    node.centroid = centroid_of(all, g);
    node.members = std::move(g);
    nodes.push_back(std::move(node));
  }
  return nodes;
}

void WeightedAdjacency::add_edge(int u, int v, double w) {
  if (u == v) throw ParameterError("self edges are not allowed");
  if (!(w >= 0.0)) throw ParameterError("edge weights must be non-negative");
  w = std::max(w, std::numeric_limits<double>::denorm_min());
  auto upsert = [&](int from, int to) {
    auto& list = neighbors_.at(static_cast<std::size_t>(from));
    auto it = std::lower_bound(list.begin(), list.end(), to,
                               [](const auto& e, int id) { return e.first < id; });
    if (it != list.end() && it->first == to) {
      it->second = std::min(it->second, w);
    } else {
      list.insert(it, {to, w});
    }
  };
  upsert(u, v);
  upsert(v, u);
}

std::optional<double> WeightedAdjacency::weight(int u, int v) const {
  const auto& list = neighbors_.at(static_cast<std::size_t>(u));
  auto it = std::lower_bound(list.begin(), list.end(), v,
                             [](const auto& e, int id) { return e.first < id; });
  if (it == list.end() || it->first != v) return std::nullopt;
  return it->second;
}

std::size_t WeightedAdjacency::edge_count() const {
  std::size_t total = 0;
  for (const auto& list : neighbors_) total += list.size();
  return total / 2;
}

WeightedAdjacency build_adjacency(std::span<const Vec3> positions,
                                  const std::vector<ClusterNode>& nodes, double edge_max) {
  if (!(edge_max > 0.0)) throw ParameterError("edge_max must be positive");
  std::vector<Vec3> member_pos;
  std::vector<int> member_node;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    if (nodes[n].id != static_cast<int>(n)) throw DataError("node ids must equal their position");
    for (std::size_t i : nodes[n].members) {
      member_pos.push_back(positions[i]);
      member_node.push_back(static_cast<int>(n));
    }
  }
  const SpatialIndex index(member_pos);
  const double query = edge_max * (1.0 + 1e-12);

  std::vector<std::map<int, double>> closest(nodes.size());
  std::vector<std::size_t> offset(nodes.size() + 1, 0);
  for (std::size_t n = 0; n < nodes.size(); ++n) offset[n + 1] = offset[n] + nodes[n].members.size();
  parallel_for(nodes.size(), [&](std::size_t u) {
    std::vector<Neighbor> found;
    for (std::size_t m = offset[u]; m < offset[u + 1]; ++m) {
      index.radius(member_pos[m], query, found);
      for (const auto& nb : found) {
        const int v = member_node[nb.index];
        if (v <= static_cast<int>(u)) continue;
        auto [it, inserted] = closest[u].try_emplace(v, nb.dist2);
        if (!inserted) it->second = std::min(it->second, nb.dist2);
      }
    }
  });

  WeightedAdjacency adj(nodes.size());
  for (std::size_t u = 0; u < nodes.size(); ++u) {
    for (const auto& [v, d2] : closest[u]) {
      const double w = std::sqrt(d2);
      if (w <= edge_max) adj.add_edge(static_cast<int>(u), v, w);
    }
  }
  return adj;
}

ShortestPathTree dijkstra(const WeightedAdjacency& adj, int source,
                          const std::vector<char>& blocked) {
  const std::size_t n = adj.size();
  ShortestPathTree out;
  out.source = source;
  out.parent.assign(n, -1);
  out.cost.assign(n, ShortestPathTree::kUnreached);
  out.cost.at(static_cast<std::size_t>(source)) = 0.0;

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::vector<char> done(n, 0);
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [c, u] = queue.top();
    queue.pop();
    const auto su = static_cast<std::size_t>(u);
    if (done[su]) continue;
    done[su] = 1;
    for (const auto& [v, w] : adj.neighbors(u)) {
      const auto sv = static_cast<std::size_t>(v);
      if (done[sv] || (!blocked.empty() && blocked[sv] && v != source)) continue;
      const double next = c + w;
      if (next < out.cost[sv] || (next == out.cost[sv] && u < out.parent[sv])) {
        out.cost[sv] = next;
        out.parent[sv] = u;
        queue.emplace(next, v);
      }
    }
  }
  return out;
}

std::vector<ShortestPathTree> shortest_path_trees(const WeightedAdjacency& adj,
                                                  std::span<const int> trunk_ids) {
  std::vector<char> blocked(adj.size(), 0);
  for (int t : trunk_ids) blocked.at(static_cast<std::size_t>(t)) = 1;
  std::vector<ShortestPathTree> trees(trunk_ids.size());
  parallel_for(trunk_ids.size(), [&](std::size_t i) { trees[i] = dijkstra(adj, trunk_ids[i], blocked); });
  return trees;
}

std::size_t SkeletonGraph::index_of(int id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const ClusterNode& n, int v) { return n.id < v; });
  if (it == nodes.end() || it->id != id) throw DataError("unknown node id " + std::to_string(id));
  return static_cast<std::size_t>(it - nodes.begin());
}

std::vector<SkeletonEdge> SkeletonGraph::edges() const {
  std::vector<SkeletonEdge> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (parent[i] >= 0) out.push_back({nodes[i].id, parent[i], edge_length[i]});
  }
  return out;
}

std::vector<int> SkeletonGraph::children(int id) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (parent[i] == id) out.push_back(nodes[i].id);
  }
  return out;
}

void SkeletonGraph::validate() const {
  const std::size_t n = nodes.size();
  if (n == 0) throw DataError("skeleton has no nodes");
  if (parent.size() != n || edge_length.size() != n || path_cost.size() != n) {
    throw DataError("skeleton arrays differ in length");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (nodes[i - 1].id >= nodes[i].id) throw DataError("skeleton node ids are not ascending");
  }
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (parent[i] < 0) {
      ++roots;
      if (nodes[i].id != root_id) throw DataError("node without parent is not the root");
    } else {
      index_of(parent[i]);
    }
  }
  if (roots != 1) throw DataError("skeleton must have exactly one root");

  std::vector<std::vector<std::size_t>> kids(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (parent[i] >= 0) kids[index_of(parent[i])].push_back(i);
  }
  std::vector<std::size_t> stack = {index_of(root_id)};
  std::size_t seen = 0;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (++seen > n) break;
    stack.insert(stack.end(), kids[i].begin(), kids[i].end());
  }
  if (seen != n) throw DataError("skeleton is not a single acyclic tree");

  const ClusterNode& root = node(root_id);
  if (root.kind != NodeKind::trunk) throw DataError("skeleton root is not a trunk node");
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes[i].kind != NodeKind::trunk) continue;
    if (!nodes[i].slice_index) throw DataError("trunk node without slice index");
    if (nodes[i].id == root_id) continue;
    const ClusterNode& p = node(parent[i]);
    if (p.kind != NodeKind::trunk || !p.slice_index || *p.slice_index >= *nodes[i].slice_index) {
      throw DataError("trunk nodes do not form a vertical chain");
    }
  }
}

SkeletonGraph merge_graphs(const std::vector<ShortestPathTree>& trees,
                           const WeightedAdjacency& adj, std::vector<ClusterNode> nodes) {
  const std::size_t n = nodes.size();
  if (adj.size() != n) throw DataError("adjacency and node list differ in size");
  std::vector<int> slice_of_tree;
  for (const auto& t : trees) {
    const auto& src = nodes.at(static_cast<std::size_t>(t.source));
    if (src.kind != NodeKind::trunk || !src.slice_index) {
      throw DataError("shortest-path tree does not start at a trunk node");
    }
    slice_of_tree.push_back(*src.slice_index);
  }
  std::vector<int> trunk;
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes[i].kind == NodeKind::trunk) trunk.push_back(static_cast<int>(i));
  }
  if (trunk.empty()) throw FitError("no trunk nodes to anchor the skeleton");
  std::sort(trunk.begin(), trunk.end(), [&](int a, int b) {
    return *nodes[static_cast<std::size_t>(a)].slice_index <
           *nodes[static_cast<std::size_t>(b)].slice_index;
  });

  std::vector<int> parent(n, -1);
  std::vector<double> length(n, 0.0), cost(n, 0.0);
  std::vector<char> keep(n, 1);
  for (std::size_t k = 1; k < trunk.size(); ++k) {
    const auto i = static_cast<std::size_t>(trunk[k]);
    parent[i] = trunk[k - 1];
    length[i] = (nodes[i].centroid - nodes[static_cast<std::size_t>(trunk[k - 1])].centroid).norm();
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (nodes[v].kind == NodeKind::trunk) continue;
    std::optional<std::size_t> owner;
    for (std::size_t t = 0; t < trees.size(); ++t) {
      const double c = trees[t].cost[v];
      if (c == ShortestPathTree::kUnreached) continue;
      if (!owner || c < trees[*owner].cost[v] ||
          (c == trees[*owner].cost[v] && slice_of_tree[t] < slice_of_tree[*owner])) {
        owner = t;
      }
    }
    if (!owner) {
      keep[v] = 0;
      continue;
    }
    parent[v] = trees[*owner].parent[v];
    cost[v] = trees[*owner].cost[v];
    length[v] = *adj.weight(static_cast<int>(v), parent[v]);
  }

  SkeletonGraph graph;
  graph.root_id = nodes[static_cast<std::size_t>(trunk.front())].id;
  for (std::size_t v = 0; v < n; ++v) {
    if (!keep[v]) {
      graph.leftover.push_back(nodes[v].id);
      continue;
    }
    graph.parent.push_back(parent[v] < 0 ? -1 : nodes[static_cast<std::size_t>(parent[v])].id);
    graph.edge_length.push_back(length[v]);
    graph.path_cost.push_back(cost[v]);
    graph.nodes.push_back(std::move(nodes[v]));
  }
  graph.validate();
  return graph;
}

BranchLabeling assign_branch_labels(const SkeletonGraph& graph, std::size_t n_points,
                                    double lb_min_fraction, std::vector<int>* node_labels) {
  if (!(lb_min_fraction >= 0.0 && lb_min_fraction <= 1.0)) {
    throw ParameterError("lb_min_fraction must lie in [0, 1]");
  }
  const std::size_t n = graph.nodes.size();
  std::vector<std::vector<std::size_t>> kids(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (graph.parent[i] >= 0) kids[graph.index_of(graph.parent[i])].push_back(i);
  }

  struct Subtree {
    std::vector<std::size_t> nodes;
    std::size_t points = 0;
  };
  std::vector<Subtree> subtrees;
  for (std::size_t i = 0; i < n; ++i) {
    if (graph.nodes[i].kind != NodeKind::trunk) continue;
    for (std::size_t c : kids[i]) {
      if (graph.nodes[c].kind == NodeKind::trunk) continue;
      Subtree s;
      std::vector<std::size_t> stack = {c};
      while (!stack.empty()) {
        const std::size_t j = stack.back();
        stack.pop_back();
        s.nodes.push_back(j);
        s.points += graph.nodes[j].members.size();
        stack.insert(stack.end(), kids[j].begin(), kids[j].end());
      }
      subtrees.push_back(std::move(s));
    }
  }
  std::stable_sort(subtrees.begin(), subtrees.end(), [&](const Subtree& a, const Subtree& b) {
    if (a.points != b.points) return a.points > b.points;
    return graph.nodes[a.nodes.front()].id < graph.nodes[b.nodes.front()].id;
  });

  BranchLabeling out;
  const double threshold = lb_min_fraction * static_cast<double>(n_points);
  for (const auto& s : subtrees) {
    if (static_cast<double>(s.points) >= threshold) ++out.lb_count;
  }
  std::vector<int> labels(n, BranchLabeling::kTrunk);
  for (std::size_t s = 0; s < subtrees.size(); ++s) {
    const int label = static_cast<int>(s) < out.lb_count ? static_cast<int>(s) + 1 : out.sb_id();
    for (std::size_t j : subtrees[s].nodes) labels[j] = label;
  }
  out.branch_id.assign(n_points, BranchLabeling::kRest);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m : graph.nodes[i].members) {
      if (m >= n_points) throw DataError("cluster member outside the labeled cloud");
      out.branch_id[m] = labels[i];
    }
  }
  if (node_labels) *node_labels = std::move(labels);
  return out;
}

SkeletonResult build_skeleton(const PointCloud& cloud, const CylinderModel& trunk,
                              const SkeletonParams& params) {
  const auto trunk_points =
      extract_trunk_points(cloud, trunk, params.trunk_distance, params.trunk_link_radius);
  TrunkSlices slices = slice_trunk(cloud, trunk_points, trunk);

  std::vector<char> in_trunk(cloud.size(), 0);
  for (std::size_t i : trunk_points) in_trunk[i] = 1;
  std::vector<std::size_t> branch_points;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!in_trunk[i]) branch_points.push_back(i);
  }

  std::vector<ClusterNode> nodes = std::move(slices.nodes);
  std::vector<int> trunk_ids;
  for (const auto& node : nodes) trunk_ids.push_back(node.id);
  SkeletonResult result;
  result.slice_height = slices.slice_height;
  if (!branch_points.empty()) {
    const std::size_t k = std::min(
        branch_points.size(), cluster_count(cloud, branch_points, params.voxel_size,
                                            params.clusters_per_100_voxels));
    auto branches = kmeans_branches(cloud, branch_points, k, params.kmeans,
                                    static_cast<int>(nodes.size()));
    result.branch_clusters = branches.size();
    for (auto& b : branches) nodes.push_back(std::move(b));
  }

  const auto positions = cloud.positions();
  const WeightedAdjacency adj = build_adjacency(positions, nodes, params.edge_max);
  const auto trees = shortest_path_trees(adj, trunk_ids);
  result.graph = merge_graphs(trees, adj, std::move(nodes));
  result.labels = assign_branch_labels(result.graph, cloud.size(), params.lb_min_fraction,
                                       &result.node_labels);
  return result;
}

nlohmann::ordered_json skeleton_to_json(const SkeletonGraph& graph,
                                        const std::vector<int>& node_labels, int lb_count) {
  nlohmann::ordered_json j;
  j["root_id"] = graph.root_id;
  if (lb_count >= 0) j["lb_count"] = lb_count;
  auto nodes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    nlohmann::ordered_json jn;
    jn["id"] = n.id;
    jn["kind"] = n.kind == NodeKind::trunk ? "trunk" : "branch";
    if (n.slice_index) jn["slice_index"] = *n.slice_index;
    jn["centroid"] = {n.centroid.x(), n.centroid.y(), n.centroid.z()};
    jn["n_points"] = n.members.size();
    if (graph.parent[i] >= 0) jn["parent_id"] = graph.parent[i];
    if (!node_labels.empty()) jn["label"] = node_labels.at(i);
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : graph.edges()) {
    edges.push_back({{"child", e.child}, {"parent", e.parent}, {"length_m", e.length}});
  }
  j["edges"] = std::move(edges);
  j["leftover"] = graph.leftover;
  return j;
}

std::string skeleton_to_dot(const SkeletonGraph& graph, const std::vector<int>& node_labels) {
  std::ostringstream out;
  out << "digraph skeleton {\n  rankdir=BT;\n";
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    out << "  n" << n.id << " [label=\"" << n.id;
    if (!node_labels.empty()) out << " (" << node_labels.at(i) << ")";
    out << "\", shape=" << (n.kind == NodeKind::trunk ? "box" : "ellipse") << ", pos=\""
        << format_double(n.centroid.x()) << ',' << format_double(n.centroid.z()) << "\"];\n";
  }
  for (const auto& e : graph.edges()) {
    out << "  n" << e.child << " -> n" << e.parent << " [label=\"" << format_double(e.length)
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace treeskel
