// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "treeskel/features.hpp"
#include "treeskel/forest.hpp"
#include "treeskel/geometry.hpp"
#include "treeskel/point_cloud.hpp"

namespace treeskel {

/// Values of the integer "class" field.
enum class PointClass : std::int64_t { ground = 0, noise = 1, major = 2, minor = 3 };

inline constexpr const char* kClassField = "class";

/// The three binary segmentation steps, applied in order.
enum class Stage { ground = 1, noise = 2, branches = 3 };

/// Accepts "1"/"ground", "2"/"noise", "3"/"branches".
Stage parse_stage(std::string_view text);
std::string stage_name(Stage stage);

/// Stage 1: {ground, tree}; stage 2: {noise, tree}; stage 3: {major, minor}.
std::vector<std::string> stage_class_names(Stage stage);
std::vector<std::string> stage_feature_names(Stage stage);

/// (ground_dist, verticality at 15 cm) per point. Requires "ground_dist".
FeatureMatrix ground_stage_features(const PointCloud& aligned);
/// (L, a, b) per point. Requires colors.
FeatureMatrix color_stage_features(const PointCloud& cloud);
FeatureMatrix stage_features(Stage stage, const PointCloud& cloud, const CylinderModel& trunk);

/// Points of `cloud` that take part in a stage given their "class" values:
/// all points for stage 1, non-ground for stage 2, major/minor for stage 3.
std::vector<std::size_t> stage_members(Stage stage, const PointCloud& cloud);

/// Stage label of a point class, or -1 when the class is not part of the stage.
int stage_label(Stage stage, PointClass c);

/// Labeled training rows for one stage. Features are computed on the
/// stage's member points only, so neighborhoods match what the classifier
/// sees during inference.
Dataset stage_dataset(Stage stage, const PointCloud& aligned, const CylinderModel& trunk);

}  // namespace treeskel
