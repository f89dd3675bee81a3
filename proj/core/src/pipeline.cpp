// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/pipeline.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "treeskel/cloud_io.hpp"
#include "treeskel/error.hpp"
#include "treeskel/evaluation.hpp"
#include "treeskel/filters.hpp"
#include "treeskel/spatial_index.hpp"

namespace treeskel {
namespace {

template <typename T>
void read_key(const nlohmann::ordered_json& value, T& target, const std::string& key) {
  try {
    target = value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParameterError("config key '" + key + "' has the wrong type");
  }
}

std::vector<std::size_t> where(const IntField& cls, PointClass c) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] == static_cast<std::int64_t>(c)) out.push_back(i);
  }
  return out;
}

std::string transform_to_text(const Eigen::Isometry3d& t) {
  std::string out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!out.empty()) out += ' ';
      out += format_double(t.matrix()(r, c));
    }
  }
  return out;
}

Eigen::Isometry3d transform_from_text(const std::string& text) {
  std::istringstream in(text);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!(in >> t.matrix()(r, c))) throw DataError("bad transform metadata");
    }
  }
  return t;
}

std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
  return mix_seed(seed, 100 + static_cast<std::uint64_t>(stage));
}

}  // namespace

void PipelineConfig::validate() const {
  const bool positive = subsample_mm > 0 && sor_k > 0 && sor_nsigma > 0 && link_radius_mm > 0 &&
                        plane_threshold_mm > 0 && plane_iterations > 0 &&
                        cylinder_threshold_mm > 0 && cylinder_iterations > 0 &&
                        cylinder_z_max_m > cylinder_z_min_m && circumference_height_m > 0 &&
                        trunk_dist_cm > 0 && trunk_link_mm > 0 && voxel_cm > 0 &&
                        clusters_per_100_voxels > 0 && kmeans_restarts > 0 &&
                        kmeans_max_iterations > 0 && edge_max_mm > 0 && match_radius_mm > 0 &&
                        n_trees > 0 && max_depth > 0 && min_samples_split > 0 &&
                        max_training_samples > 0;
  if (!positive) throw ParameterError("configuration values must be positive");
  if (circumference_m < 0) throw ParameterError("circumference_m must be >= 0 (0 disables scaling)");
  if (features_per_split < 0) throw ParameterError("features_per_split must be >= 0");
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw ParameterError("train_fraction must lie in (0, 1)");
  }
  if (!(lb_min_fraction >= 0 && lb_min_fraction <= 1)) {
    throw ParameterError("lb_min_fraction must lie in [0, 1]");
  }
}

ForestParams PipelineConfig::forest_params(Stage stage) const {
  return {n_trees, max_depth, min_samples_split, features_per_split, stage_seed(seed, stage)};
}

RansacParams PipelineConfig::plane_ransac() const {
  return {plane_threshold_mm / 1000.0, plane_iterations, mix_seed(seed, 1)};
}

RansacParams PipelineConfig::cylinder_ransac() const {
  return {cylinder_threshold_mm / 1000.0, cylinder_iterations, mix_seed(seed, 2)};
}

CylinderFitOptions PipelineConfig::cylinder_options() const {
  CylinderFitOptions o;
  o.z_min = cylinder_z_min_m;
  o.z_max = cylinder_z_max_m;
  return o;
}

SkeletonParams PipelineConfig::skeleton_params() const {
  SkeletonParams p;
  p.trunk_distance = trunk_dist_cm / 100.0;
  p.trunk_link_radius = trunk_link_mm / 1000.0;
  p.voxel_size = voxel_cm / 100.0;
  p.clusters_per_100_voxels = clusters_per_100_voxels;
  p.edge_max = edge_max_mm / 1000.0;
  p.lb_min_fraction = lb_min_fraction;
  p.kmeans = {kmeans_restarts, kmeans_max_iterations, mix_seed(seed, 3)};
  return p;
}

#define TREESKEL_CONFIG_FIELDS(X)                                                             \
  X(subsample_mm) X(sor_k) X(sor_nsigma) X(link_radius_mm) X(plane_threshold_mm)              \
  X(plane_iterations) X(cylinder_threshold_mm) X(cylinder_iterations) X(cylinder_z_min_m)     \
  X(cylinder_z_max_m) X(circumference_m) X(circumference_height_m) X(trunk_dist_cm)           \
  X(trunk_link_mm) X(voxel_cm) X(clusters_per_100_voxels) X(kmeans_restarts)                  \
  X(kmeans_max_iterations) X(edge_max_mm) X(match_radius_mm) X(lb_min_fraction) X(n_trees)    \
  X(max_depth) X(min_samples_split) X(features_per_split) X(train_fraction)                   \
  X(max_training_samples) X(seed) X(ground_model) X(noise_model) X(branches_model)

void to_json(nlohmann::ordered_json& j, const PipelineConfig& c) {
  j = nlohmann::ordered_json::object();
#define X(name) j[#name] = c.name;
  TREESKEL_CONFIG_FIELDS(X)
#undef X
}

void from_json(const nlohmann::ordered_json& j, PipelineConfig& c) {
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define X(name)                      \
  if (key == #name) {                \
    read_key(value, c.name, key);    \
    known = true;                    \
  }
    TREESKEL_CONFIG_FIELDS(X)
#undef X
    if (!known) throw ParameterError("unknown config key '" + key + "'");
  }
}

#undef TREESKEL_CONFIG_FIELDS

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse '" + path.string() + "': " + e.what());
  }
  auto config = j.get<PipelineConfig>();
  config.validate();
  return config;
}

Preprocessed preprocess(const PointCloud& raw, const PipelineConfig& config) {
  if (raw.size() < 3) throw DataError("input cloud needs at least 3 points");
  const auto kept = subsample_min_distance_indices(raw, config.subsample_mm / 1000.0);
  PointCloud thinned = raw.subset(kept);
  thinned.set_field(kInputIndexField, IntField(kept.begin(), kept.end()));

  Preprocessed out;
  const PlaneFit fit = ransac_plane(thinned, config.plane_ransac());
  out.plane = fit.model;
  GroundAlignment aligned = align_to_ground(thinned, fit.model);
  out.cloud = std::move(aligned.cloud);
  out.transform = aligned.transform;
  return out;
}

const RandomForest& StageModels::get(Stage stage) const {
  const std::optional<RandomForest>* slot = nullptr;
  switch (stage) {
    case Stage::ground: slot = &ground; break;
    case Stage::noise: slot = &noise; break;
    case Stage::branches: slot = &branches; break;
  }
  if (!slot || !slot->has_value()) {
    throw DataError("no model for stage '" + stage_name(stage) + "'");
  }
  return **slot;
}

StageModels load_models(const PipelineConfig& config) {
  StageModels m;
  if (!config.ground_model.empty()) m.ground = load_forest(config.ground_model);
  if (!config.noise_model.empty()) m.noise = load_forest(config.noise_model);
  if (!config.branches_model.empty()) m.branches = load_forest(config.branches_model);
  return m;
}

Classified classify(const Preprocessed& pre, const StageModels& models,
                    const PipelineConfig& config) {
  for (Stage s : {Stage::ground, Stage::noise, Stage::branches}) {
    const auto& forest = models.get(s);
    if (forest.num_features() != stage_feature_names(s).size()) {
      throw DataError("model for stage '" + stage_name(s) + "' expects " +
                      std::to_string(forest.num_features()) + " features");
    }
  }
  Classified out;
  out.cloud = pre.cloud;
  out.transform = pre.transform;
  const std::size_t n = out.cloud.size();
  IntField cls(n, static_cast<std::int64_t>(PointClass::noise));
  IntField filtered(n, 0);
  auto mark = [&](const std::vector<std::size_t>& members, const std::vector<int>& labels,
                  PointClass zero, PointClass one) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      cls[members[i]] = static_cast<std::int64_t>(labels[i] == 0 ? zero : one);
    }
  };

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const auto ground_pred = models.get(Stage::ground).predict_all(ground_stage_features(out.cloud));
  mark(all, ground_pred, PointClass::ground, PointClass::major);
  std::vector<std::size_t> tree = where(cls, PointClass::major);

  const auto noise_pred =
      models.get(Stage::noise).predict_all(color_stage_features(out.cloud.subset(tree)));
  mark(tree, noise_pred, PointClass::noise, PointClass::major);
  tree = where(cls, PointClass::major);

  if (tree.size() > static_cast<std::size_t>(config.sor_k)) {
    const auto kept = sor_filter_indices(out.cloud.subset(tree), config.sor_k, config.sor_nsigma);
    std::vector<std::size_t> survivors;
    for (std::size_t k : kept) survivors.push_back(tree[k]);
    for (std::size_t i : tree) {
      cls[i] = static_cast<std::int64_t>(PointClass::noise);
      filtered[i] = 1;
    }
    for (std::size_t i : survivors) filtered[i] = 0;
    for (std::size_t i : survivors) cls[i] = static_cast<std::int64_t>(PointClass::major);
    tree = std::move(survivors);
  }
  if (tree.empty()) throw FitError("no tree points left after ground and noise removal");
  {
    const auto components = connected_components(out.cloud.subset(tree), config.link_radius_mm / 1000.0);
    std::vector<std::size_t> largest;
    for (std::size_t k : components.front()) largest.push_back(tree[k]);
    for (std::size_t i : tree) {
      cls[i] = static_cast<std::int64_t>(PointClass::noise);
      filtered[i] = 1;
    }
    for (std::size_t i : largest) filtered[i] = 0;
    for (std::size_t i : largest) cls[i] = static_cast<std::int64_t>(PointClass::major);
    tree = std::move(largest);
  }

  PointCloud tree_cloud = out.cloud.subset(tree);
  out.trunk = fit_trunk_cylinder(tree_cloud, config.cylinder_ransac(), config.cylinder_options());
  if (config.circumference_m > 0.0) {
    ScaledCloud scaled = scale_by_trunk_circumference(out.cloud, config.circumference_m,
                                                      config.circumference_height_m, out.trunk);
    out.cloud = std::move(scaled.cloud);
    out.trunk = scaled.cylinder;
    out.scale = scaled.scale;
    tree_cloud = out.cloud.subset(tree);
  }

  out.branch_features = compute_all_features(tree_cloud, out.trunk);
  const auto branch_pred = models.get(Stage::branches).predict_all(out.branch_features);
  mark(tree, branch_pred, PointClass::major, PointClass::minor);

  out.cloud.set_field(kClassField, std::move(cls));
  out.cloud.set_field(kFilteredField, std::move(filtered));
  out.cloud.metadata()["treeskel"] = "classified";
  out.cloud.metadata()["trunk_cylinder"] = nlohmann::ordered_json(out.trunk).dump();
  out.cloud.metadata()["scale"] = format_double(out.scale);
  out.cloud.metadata()["transform"] = transform_to_text(out.transform);
  return out;
}

bool is_classified(const PointCloud& cloud) {
  const auto it = cloud.metadata().find("treeskel");
  return it != cloud.metadata().end() && it->second == "classified";
}

Classified classified_from_cloud(PointCloud cloud) {
  if (!is_classified(cloud)) throw DataError("cloud is not a classified treeskel cloud");
  if (!cloud.has_field(kClassField)) throw DataError("classified cloud has no 'class' field");
  Classified out;
  const auto& meta = cloud.metadata();
  auto entry = [&](const std::string& key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) throw DataError("classified cloud lacks '" + key + "' metadata");
    return it->second;
  };
  try {
    out.trunk = nlohmann::ordered_json::parse(entry("trunk_cylinder")).get<CylinderModel>();
    out.scale = std::stod(entry("scale"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad trunk_cylinder metadata: ") + e.what());
  } catch (const std::logic_error&) {
    throw DataError("bad scale metadata");
  }
  out.transform = transform_from_text(entry("transform"));
  out.cloud = std::move(cloud);
  return out;
}

TrainedStage train_stage(const PointCloud& labeled, Stage stage, const PipelineConfig& config) {
  if (!labeled.has_field(kClassField)) throw DataError("training cloud has no 'class' field");
  const Preprocessed pre = preprocess(labeled, config);
  CylinderModel trunk;
  if (stage == Stage::branches) {
    const auto members = stage_members(stage, pre.cloud);
    if (members.empty()) throw DataError("training cloud has no major or minor points");
    trunk = fit_trunk_cylinder(pre.cloud.subset(members), config.cylinder_ransac(),
                               config.cylinder_options());
  }
  const Dataset full = stage_dataset(stage, pre.cloud, trunk);
  const std::uint64_t seed = stage_seed(config.seed, stage);
  const Dataset capped = stratified_cap(full, config.max_training_samples, mix_seed(seed, 1));
  const auto [train, validation] = split_train_validation(capped, config.train_fraction, mix_seed(seed, 2));
  TrainedStage out;
  out.forest = RandomForest::train(train, config.forest_params(stage));
  out.validation = evaluate(out.forest, validation);
  out.training_rows = train.size();
  out.validation_rows = validation.size();
  return out;
}

SkeletonRun skeletonize(const Classified& classified, const PipelineConfig& config) {
  const auto& cls = classified.cloud.int_field(kClassField);
  const auto major = where(cls, PointClass::major);
  if (major.empty()) throw FitError("no major-branch points to skeletonize");
  const PointCloud tree = classified.cloud.subset(major);
  SkeletonRun run;
  run.skeleton = build_skeleton(tree, classified.trunk, config.skeleton_params());
  run.cloud_labels.lb_count = run.skeleton.labels.lb_count;
  run.cloud_labels.branch_id.assign(classified.cloud.size(), BranchLabeling::kRest);
  for (std::size_t k = 0; k < major.size(); ++k) {
    run.cloud_labels.branch_id[major[k]] = run.skeleton.labels.branch_id[k];
  }
  return run;
}

SkeletonGraph to_input_frame(SkeletonGraph graph, const Eigen::Isometry3d& transform,
                             double scale) {
  if (!(scale > 0.0)) throw ParameterError("scale must be positive");
  const Eigen::Isometry3d inverse = transform.inverse();
  for (auto& node : graph.nodes) node.centroid = inverse * Vec3(node.centroid / scale);
  for (double& v : graph.edge_length) v /= scale;
  for (double& v : graph.path_cost) v /= scale;
  return graph;
}

BranchLabeling transfer_labels(const PointCloud& raw, const PointCloud& preprocessed,
                               const BranchLabeling& labels) {
  if (labels.branch_id.size() != preprocessed.size()) {
    throw DataError("labels do not match the preprocessed cloud");
  }
  const auto& input_index = preprocessed.int_field(kInputIndexField);
  const IntField* filtered =
      preprocessed.has_field(kFilteredField) ? &preprocessed.int_field(kFilteredField) : nullptr;
  BranchLabeling out;
  out.lb_count = labels.lb_count;
  out.branch_id.assign(raw.size(), BranchLabeling::kRest);
  std::vector<char> retained(raw.size(), 0);
  std::vector<Vec3> sources;
  std::vector<int> source_label;
  for (std::size_t k = 0; k < preprocessed.size(); ++k) {
    const auto i = static_cast<std::size_t>(input_index[k]);
    if (i >= raw.size()) throw DataError("input_index points outside the raw cloud");
    retained[i] = 1;
    out.branch_id[i] = labels.branch_id[k];
    if (filtered && (*filtered)[k] != 0) continue;
    sources.push_back(raw[i].position);
    source_label.push_back(labels.branch_id[k]);
  }
  if (sources.empty()) return out;
  const SpatialIndex index(std::move(sources));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (retained[i]) continue;
    out.branch_id[i] = source_label[index.knn(raw[i].position, 1).front().index];
  }
  return out;
}

PointCloud labeled_output(const PointCloud& raw, const BranchLabeling& labels) {
  std::vector<Point> points;
  points.reserve(raw.size());
  for (const auto& p : raw) {
    Point q;
    q.position = p.position;
    q.color = p.color;
    q.source_id = p.source_id;
    points.push_back(q);
  }
  PointCloud out(std::move(points));
  attach_labeling(out, labels);
  return out;
}

}  // namespace treeskel
