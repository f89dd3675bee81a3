// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeskel/evaluation.hpp"
#include "treeskel/point_cloud.hpp"
#include "treeskel/skeleton.hpp"

namespace treeskel {

struct Hole {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

/// Parameters of a generated tree. Lengths in meters, angles in degrees,
/// ranges as [low, high].
struct TreeSpec {
  std::uint64_t seed = 1;
  double trunk_height = 1.8;
  double trunk_radius = 0.055;
  int leading_branch_count = 5;
  std::array<double, 2> lb_height = {0.6, 0.95};  ///< fraction of trunk height
  std::array<double, 2> branch_angle_deg = {65.0, 80.0};  ///< from vertical
  std::array<double, 2> lb_length = {0.9, 1.2};
  double lb_radius = 0.016;
  int recursion_depth = 2;  ///< 1: leading branches only
  std::array<int, 2> child_count = {1, 2};
  std::array<double, 2> child_angle_deg = {35.0, 55.0};  ///< from the parent axis
  std::array<double, 2> child_position = {0.3, 0.85};    ///< fraction of parent length
  double radius_decay = 0.7;
  double length_decay = 0.55;
  int small_branch_count = 2;
  std::array<double, 2> small_branch_height = {0.3, 0.5};
  double small_branch_radius = 0.012;
  std::array<double, 2> small_branch_length = {0.2, 0.3};
  double twigs_per_meter = 4.0;
  double twig_radius = 0.004;
  std::array<double, 2> twig_length = {0.06, 0.14};
  double point_density = 85000.0;  ///< bark points per square meter
  double noise_sigma = 0.002;
  double ground_extent = 1.0;  ///< radius of the ground disk
  double ground_density = 5000.0;
  int sky_noise_count = 1500;
  double lb_min_fraction = 0.05;
  std::vector<Hole> holes;

  /// Throws ParameterError for inconsistent values.
  void validate() const;
};

void to_json(nlohmann::ordered_json& j, const TreeSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::ordered_json& j, TreeSpec& spec);
TreeSpec load_tree_spec(const std::filesystem::path& path);

enum class SegmentKind { trunk, leading, child, small, twig };

/// One straight cylindrical piece of the generated tree.
struct Segment {
  int id = 0;
  int parent = -1;
  SegmentKind kind = SegmentKind::trunk;
  Vec3 start = Vec3::Zero();  ///< on the parent axis
  Vec3 dir = Vec3::UnitZ();
  double length = 0.0;
  double radius = 0.0;
  int top_branch = -1;  ///< trunk-attached ancestor (itself for LB/SB), -1 for trunk
  Vec3 end() const { return start + length * dir; }
};

struct GroundTruth {
  /// Integer fields "class", "branch_id" and "segment" (-1 off the tree).
  PointCloud cloud;
  EvalGraph skeleton;
  std::vector<std::string> node_kinds;
  std::vector<std::size_t> node_points;  ///< bark points of the segment a tip ends
  BranchLabeling labels;
  std::vector<Segment> segments;
  std::size_t branch_count = 0;  ///< non-twig branches, trunk excluded
  std::size_t rejected_branches = 0;  ///< dropped after repeated collisions
};

GroundTruth generate_tree(const TreeSpec& spec);

/// Removes points inside any hole (distance <= radius). Labels of the
/// remaining points and the skeleton are kept.
GroundTruth perturb_with_holes(const GroundTruth& truth, const std::vector<Hole>& holes);

/// 2 + 2 B nodes, with B the branch count implied by fixed child counts.
/// Throws ParameterError when the child count range is not a single value.
std::size_t analytic_node_count(const TreeSpec& spec);

/// Writes tree.ply, reference_skeleton.json and labels.csv into `dir`.
void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& dir);

}  // namespace treeskel
