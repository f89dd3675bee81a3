// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "treeskel/forest.hpp"
#include "treeskel/geometry.hpp"
#include "treeskel/point_cloud.hpp"
#include "treeskel/skeleton.hpp"
#include "treeskel/stages.hpp"

namespace treeskel {

/// Every tunable of the pipeline. Lengths carry their unit in the name.
struct PipelineConfig {
  double subsample_mm = 5.0;
  int sor_k = 6;
  double sor_nsigma = 1.0;
  double link_radius_mm = 10.0;
  double plane_threshold_mm = 10.0;
  int plane_iterations = 1000;
  double cylinder_threshold_mm = 10.0;
  int cylinder_iterations = 2000;
  double cylinder_z_min_m = 0.2;
  double cylinder_z_max_m = 1.2;
  double circumference_m = 0.0;  ///< 0 disables scaling
  double circumference_height_m = 0.5;
  double trunk_dist_cm = 5.0;
  double trunk_link_mm = 20.0;
  double voxel_cm = 1.0;
  double clusters_per_100_voxels = 2.0;
  int kmeans_restarts = 5;
  int kmeans_max_iterations = 100;
  double edge_max_mm = 30.0;
  double match_radius_mm = 50.0;
  double lb_min_fraction = 0.05;
  int n_trees = 200;
  int max_depth = 30;
  int min_samples_split = 10;
  int features_per_split = 0;
  double train_fraction = 0.75;
  std::size_t max_training_samples = 20000;
  std::uint64_t seed = 0;
  std::string ground_model;
  std::string noise_model;
  std::string branches_model;

  /// Throws ParameterError for non-positive values.
  void validate() const;
  ForestParams forest_params(Stage stage) const;
  RansacParams plane_ransac() const;
  RansacParams cylinder_ransac() const;
  CylinderFitOptions cylinder_options() const;
  SkeletonParams skeleton_params() const;
};

void to_json(nlohmann::ordered_json& j, const PipelineConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::ordered_json& j, PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

inline constexpr const char* kInputIndexField = "input_index";
/// 1 for tree points removed by the outlier and component filters.
inline constexpr const char* kFilteredField = "filtered";

struct Preprocessed {
  PointCloud cloud;  ///< ground-aligned, with "ground_dist" and "input_index"
  PlaneModel plane;  ///< in input coordinates
  Eigen::Isometry3d transform = Eigen::Isometry3d::Identity();
};

/// Minimum-distance thinning followed by RANSAC ground alignment.
Preprocessed preprocess(const PointCloud& raw, const PipelineConfig& config);

struct StageModels {
  std::optional<RandomForest> ground;
  std::optional<RandomForest> noise;
  std::optional<RandomForest> branches;

  const RandomForest& get(Stage stage) const;  ///< throws DataError when missing
};

StageModels load_models(const PipelineConfig& config);

struct Classified {
  PointCloud cloud;  ///< preprocessed cloud with "class"; outliers count as noise
  CylinderModel trunk;
  double scale = 1.0;
  Eigen::Isometry3d transform = Eigen::Isometry3d::Identity();  ///< input to aligned
  FeatureMatrix branch_features;  ///< stage-3 rows of the points reaching stage 3
};

/// True when the cloud carries the metadata written by classify().
bool is_classified(const PointCloud& cloud);
/// Restores a classified cloud saved to disk (features are not restored).
Classified classified_from_cloud(PointCloud cloud);

/// Ground, noise, outlier and component removal, trunk fit and major/minor
/// split. Throws FitError when the trunk cannot be fitted.
Classified classify(const Preprocessed& pre, const StageModels& models,
                    const PipelineConfig& config);

struct TrainedStage {
  RandomForest forest;
  ClassificationReport validation;
  std::size_t training_rows = 0;
  std::size_t validation_rows = 0;
};

/// Trains one stage on a cloud carrying "class" in input coordinates.
TrainedStage train_stage(const PointCloud& labeled, Stage stage, const PipelineConfig& config);

struct SkeletonRun {
  SkeletonResult skeleton;
  BranchLabeling cloud_labels;  ///< per point of the classified cloud
};

/// Builds the skeleton from the major-branch points of a classified cloud.
SkeletonRun skeletonize(const Classified& classified, const PipelineConfig& config);

/// Maps node positions and lengths from the aligned, scaled frame back to
/// input coordinates.
SkeletonGraph to_input_frame(SkeletonGraph graph, const Eigen::Isometry3d& transform,
                             double scale);

/// Carries per-point labels of the preprocessed cloud back to every raw
/// point: retained points keep theirs, dropped points take the label of the
/// nearest retained point that was not filtered (see kFilteredField).
BranchLabeling transfer_labels(const PointCloud& raw, const PointCloud& preprocessed,
                               const BranchLabeling& labels);

/// Positions and colors of `raw` with "branch_id" and lb_count metadata.
PointCloud labeled_output(const PointCloud& raw, const BranchLabeling& labels);

}  // namespace treeskel
