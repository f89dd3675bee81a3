// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/stages.hpp"

#include "treeskel/color.hpp"
#include "treeskel/error.hpp"
#include "treeskel/parallel.hpp"
#include "treeskel/spatial_index.hpp"

namespace treeskel {

Stage parse_stage(std::string_view text) {
  if (text == "1" || text == "ground") return Stage::ground;
  if (text == "2" || text == "noise") return Stage::noise;
  if (text == "3" || text == "branches") return Stage::branches;
  throw ParameterError("unknown stage '" + std::string(text) + "'");
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::ground: return "ground";
    case Stage::noise: return "noise";
    case Stage::branches: return "branches";
  }
  return "?";
}

std::vector<std::string> stage_class_names(Stage stage) {
  switch (stage) {
    case Stage::ground: return {"ground", "tree"};
    case Stage::noise: return {"noise", "tree"};
    case Stage::branches: return {"major", "minor"};
  }
  return {};
}

std::vector<std::string> stage_feature_names(Stage stage) {
  switch (stage) {
    case Stage::ground: return {"ground_dist", "verticality_15cm"};
    case Stage::noise: return {"L", "a", "b"};
    case Stage::branches: return feature_names();
  }
  return {};
}

FeatureMatrix ground_stage_features(const PointCloud& aligned) {
  if (!aligned.has_field("ground_dist")) {
    throw DataError("ground stage needs the ground_dist field (run ground alignment first)");
  }
  const RealField dist = aligned.real_field("ground_dist");
  const auto positions = aligned.positions();
  const SpatialIndex index(positions);
  const auto vert = verticality_at(index, positions, kRadius15cm);
  FeatureMatrix out(static_cast<Eigen::Index>(aligned.size()), 2);
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) = dist[i];
    out(static_cast<Eigen::Index>(i), 1) = vert[i];
  }
  return out;
}

FeatureMatrix color_stage_features(const PointCloud& cloud) {
  if (!cloud.empty() && !cloud.has_color()) throw DataError("noise stage needs point colors");
  FeatureMatrix out(static_cast<Eigen::Index>(cloud.size()), 3);
  parallel_for(cloud.size(), [&](std::size_t i) {
    const Rgb c = *cloud[i].color;
    const Lab lab = rgb_to_cielab(c.r, c.g, c.b);
    out(static_cast<Eigen::Index>(i), 0) = lab.L;
    out(static_cast<Eigen::Index>(i), 1) = lab.a;
    out(static_cast<Eigen::Index>(i), 2) = lab.b;
  });
  return out;
}

FeatureMatrix stage_features(Stage stage, const PointCloud& cloud, const CylinderModel& trunk) {
  switch (stage) {
    case Stage::ground: return ground_stage_features(cloud);
    case Stage::noise: return color_stage_features(cloud);
    case Stage::branches: return compute_all_features(cloud, trunk);
  }
  return {};
}

int stage_label(Stage stage, PointClass c) {
  switch (stage) {
    case Stage::ground: return c == PointClass::ground ? 0 : 1;
    case Stage::noise:
      if (c == PointClass::ground) return -1;
      return c == PointClass::noise ? 0 : 1;
    case Stage::branches:
      if (c == PointClass::major) return 0;
      if (c == PointClass::minor) return 1;
      return -1;
  }
  return -1;
}

std::vector<std::size_t> stage_members(Stage stage, const PointCloud& cloud) {
  if (!cloud.has_field(kClassField)) throw DataError("cloud has no 'class' field");
  const auto& cls = cloud.int_field(kClassField);
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cls[i] < 0 || cls[i] > 3) {
      throw DataError("class value " + std::to_string(cls[i]) + " at point " + std::to_string(i) +
                      " is outside 0..3");
    }
    if (stage_label(stage, static_cast<PointClass>(cls[i])) >= 0) members.push_back(i);
  }
  return members;
}

Dataset stage_dataset(Stage stage, const PointCloud& aligned, const CylinderModel& trunk) {
  const auto members = stage_members(stage, aligned);
  if (members.empty()) throw DataError("no points take part in stage " + stage_name(stage));
  const PointCloud subset = aligned.subset(members);
  Dataset data;
  data.features = stage_features(stage, subset, trunk);
  data.class_names = stage_class_names(stage);
  const auto& cls = subset.int_field(kClassField);
  data.labels.reserve(subset.size());
  for (auto c : cls) data.labels.push_back(stage_label(stage, static_cast<PointClass>(c)));
  return data;
}

}  // namespace treeskel
