// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeskel/forest.hpp"
#include "treeskel/point_cloud.hpp"
#include "treeskel/skeleton.hpp"

namespace treeskel {

/// Graph used for comparisons. Edges are stored child-first when the
/// source graph is rooted; each edge carries a length and a branch label.
struct EvalGraph {
  struct Edge {
    int a = 0;  ///< node index (child side)
    int b = 0;  ///< node index (parent side)
    double length = 0.0;
    int label = 0;
  };

  std::vector<int> ids;
  std::vector<Vec3> positions;
  std::vector<int> labels;  ///< branch id per node; 0 when unlabeled
  std::vector<Edge> edges;
  int lb_count = 0;  ///< leading-branch count behind the labels

  std::size_t size() const noexcept { return ids.size(); }
  std::vector<std::vector<int>> neighbors() const;
  double total_length() const;
  /// Throws DataError for self edges, duplicate edges or a disconnected graph.
  void validate() const;
};

/// Edge label = label of the child node.
EvalGraph eval_graph(const SkeletonGraph& graph, const std::vector<int>& node_labels = {},
                     int lb_count = 0);
/// Reads the skeleton JSON schema (nodes with centroid/label, edges with length_m).
EvalGraph eval_graph_from_json(const nlohmann::ordered_json& j);
EvalGraph load_eval_graph(const std::filesystem::path& path);
/// Writes the skeleton JSON schema; the first node is reported as root and
/// parent ids follow the edge direction.
nlohmann::ordered_json eval_graph_to_json(const EvalGraph& graph,
                                          const std::vector<std::string>& kinds = {},
                                          const std::vector<std::size_t>& point_counts = {});

/// Removes every node of degree 2 and fuses its two edges (lengths add; the
/// fused edge keeps the non-trunk label, preferring the child side). A node
/// whose two neighbors are already adjacent is kept so no duplicate edge
/// appears. Idempotent.
EvalGraph collapse_degree_two(const EvalGraph& graph);

struct NodeMatching {
  std::vector<int> reference_to_computed;  ///< -1 when unmatched
  std::size_t matched = 0;
};

/// A (reference, computed) pair is a candidate when the nodes lie within
/// `radius` and some neighbor of one lies within `radius` of some neighbor of
/// the other. Candidates are accepted greedily by ascending distance, one to
/// one (ties by reference then computed index).
NodeMatching match_nodes(const EvalGraph& computed, const EvalGraph& reference, double radius);

/// A reference edge is true when both endpoints are matched and their
/// matched computed nodes are adjacent.
std::vector<char> match_edges(const NodeMatching& matching, const EvalGraph& computed,
                              const EvalGraph& reference);

struct Tally {
  std::size_t hits = 0;
  std::size_t total = 0;
  std::optional<double> percent() const {
    return total == 0 ? std::nullopt : std::optional<double>(100.0 * hits / total);
  }
};

struct MatchReport {
  std::map<int, Tally> nodes_by_label;  ///< keyed by reference node label
  std::map<int, Tally> edges_by_label;
  Tally nodes;
  Tally edges;
  double edges_length_weighted_pct = 0.0;
  std::size_t computed_nodes = 0;
  std::vector<std::pair<int, int>> false_edges;  ///< reference (child, parent) ids
  int lb_count = 0;
};

/// Collapses both graphs, then matches nodes and edges.
MatchReport compare_graphs(const EvalGraph& computed, const EvalGraph& reference, double radius);

struct PointAssignmentReport {
  std::vector<std::string> class_names;  ///< Trunk, LB 1..m, SB, Rest
  ConfusionMatrix matrix;
  std::optional<double> overall;  ///< over reference points not labeled Rest
  AccuracySummary accuracy;       ///< per-class PA/UA over the full matrix
  double rest_fraction = 0.0;     ///< predicted Rest among non-Rest reference points
  std::vector<int> lb_alignment;  ///< predicted LB i+1 -> matrix LB index
};

/// Aligns predicted LB indices to reference LB indices by greedy maximum
/// overlap before filling the matrix. Unaligned predicted LBs get indices
/// after the reference ones.
PointAssignmentReport score_point_assignment(const BranchLabeling& predicted,
                                             const BranchLabeling& reference);

/// Reads "branch_id" and the "lb_count" metadata entry.
BranchLabeling labeling_from_cloud(const PointCloud& cloud);
void attach_labeling(PointCloud& cloud, const BranchLabeling& labels);

nlohmann::ordered_json report_to_json(const MatchReport& graph,
                                      const PointAssignmentReport& points);
std::string report_to_table(const MatchReport& graph, const PointAssignmentReport& points);
std::string label_name(int label, int lb_count);

}  // namespace treeskel
