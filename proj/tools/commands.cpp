// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <utility>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "treeskel/cloud_io.hpp"
#include "treeskel/error.hpp"
#include "treeskel/evaluation.hpp"
#include "treeskel/features.hpp"
#include "treeskel/parallel.hpp"
#include "treeskel/pipeline.hpp"
#include "treeskel/stages.hpp"
#include "treeskel/synthetic.hpp"

namespace treeskel::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct ConfigFlags {
  PipelineConfig values;
  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> bound;

  template <typename T>
  void bind(CLI::App& app, const std::string& name, T PipelineConfig::*field,
            const std::string& help) {
    CLI::Option* opt = app.add_option("--" + name, values.*field, help)->capture_default_str();
    bound.emplace_back(opt, [this, field](PipelineConfig& c) { c.*field = values.*field; });
  }

  /// File values first, then every flag given on the command line.
  PipelineConfig resolve() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    for (const auto& [opt, apply] : bound) {
      if (opt->count() > 0) apply(c);
    }
    c.validate();
    return c;
  }
};

void add_preprocess_flags(CLI::App& app, ConfigFlags& f) {
  f.bind(app, "subsample-mm", &PipelineConfig::subsample_mm, "minimum point distance");
  f.bind(app, "plane-threshold-mm", &PipelineConfig::plane_threshold_mm,
         "ground plane RANSAC inlier distance");
  f.bind(app, "plane-iterations", &PipelineConfig::plane_iterations, "ground plane RANSAC draws");
}

void add_classify_flags(CLI::App& app, ConfigFlags& f) {
  f.bind(app, "sor-k", &PipelineConfig::sor_k, "SOR neighbor count");
  f.bind(app, "sor-nsigma", &PipelineConfig::sor_nsigma, "SOR standard deviation multiplier");
  f.bind(app, "link-radius-mm", &PipelineConfig::link_radius_mm,
         "component link radius for disconnected-part removal");
  f.bind(app, "cylinder-threshold-mm", &PipelineConfig::cylinder_threshold_mm,
         "trunk cylinder RANSAC inlier distance");
  f.bind(app, "cylinder-iterations", &PipelineConfig::cylinder_iterations,
         "trunk cylinder RANSAC draws");
  f.bind(app, "cylinder-z-min-m", &PipelineConfig::cylinder_z_min_m,
         "lower bound of the trunk fitting band");
  f.bind(app, "cylinder-z-max-m", &PipelineConfig::cylinder_z_max_m,
         "upper bound of the trunk fitting band");
  f.bind(app, "circumference-m", &PipelineConfig::circumference_m,
         "measured trunk circumference, 0 disables scaling");
  f.bind(app, "circumference-height-m", &PipelineConfig::circumference_height_m,
         "height of the circumference measurement");
  f.bind(app, "ground-model", &PipelineConfig::ground_model, "stage 1 model file");
  f.bind(app, "noise-model", &PipelineConfig::noise_model, "stage 2 model file");
  f.bind(app, "branches-model", &PipelineConfig::branches_model, "stage 3 model file");
}

void add_forest_flags(CLI::App& app, ConfigFlags& f) {
  f.bind(app, "n-trees", &PipelineConfig::n_trees, "random forest size");
  f.bind(app, "max-depth", &PipelineConfig::max_depth, "maximum tree depth");
  f.bind(app, "min-samples-split", &PipelineConfig::min_samples_split,
         "minimum rows to split a node");
  f.bind(app, "features-per-split", &PipelineConfig::features_per_split,
         "features tried per split, 0 for sqrt(count)");
  f.bind(app, "train-fraction", &PipelineConfig::train_fraction, "training share of each class");
  f.bind(app, "max-training-samples", &PipelineConfig::max_training_samples,
         "row cap per stage before the split");
}

void add_skeleton_flags(CLI::App& app, ConfigFlags& f) {
  f.bind(app, "trunk-dist-cm", &PipelineConfig::trunk_dist_cm,
         "trunk membership distance to the cylinder");
  f.bind(app, "trunk-link-mm", &PipelineConfig::trunk_link_mm,
         "link radius of the trunk connectivity check");
  f.bind(app, "voxel-cm", &PipelineConfig::voxel_cm, "voxel edge for the cluster-count rule");
  f.bind(app, "clusters-per-100-voxels", &PipelineConfig::clusters_per_100_voxels,
         "k-means clusters per 100 occupied voxels");
  f.bind(app, "kmeans-restarts", &PipelineConfig::kmeans_restarts, "k-means restarts");
  f.bind(app, "kmeans-max-iterations", &PipelineConfig::kmeans_max_iterations,
         "Lloyd iteration cap");
  f.bind(app, "edge-max-mm", &PipelineConfig::edge_max_mm, "maximum cluster gap for an edge");
  f.bind(app, "lb-min-fraction", &PipelineConfig::lb_min_fraction,
         "point share that makes a trunk subtree a leading branch");
}

void add_common_flags(CLI::App& app, ConfigFlags& f) {
  app.add_option("--config", f.config_path, "JSON config file; flags override it")
      ->check(CLI::ExistingFile);
  f.bind(app, "seed", &PipelineConfig::seed, "seed for every randomized step");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
}

void echo_config(const fs::path& dir, const PipelineConfig& config) {
  write_json(dir / "config.json", Json(config));
}

std::string percent_text(std::optional<double> v) {
  return v ? format_double(std::round(*v * 100.0) / 100.0) : std::string("n/a");
}

Json model_extra(Stage stage, const TrainedStage& trained) {
  Json j;
  j["stage"] = stage_name(stage);
  j["feature_names"] = stage_feature_names(stage);
  j["class_names"] = stage_class_names(stage);
  j["training_rows"] = trained.training_rows;
  j["validation_rows"] = trained.validation_rows;
  j["validation"] = report_json(trained.validation);
  return j;
}

TrainedStage train_and_report(const PointCloud& labeled, Stage stage,
                              const PipelineConfig& config, std::ostream& out) {
  TrainedStage trained = train_stage(labeled, stage, config);
  out << "stage " << stage_name(stage) << ": " << trained.training_rows << " training rows, "
      << trained.validation_rows << " validation rows\n"
      << report_table(trained.validation);
  return trained;
}

Classified run_classification(const PointCloud& raw, const StageModels& models,
                              const PipelineConfig& config, const std::optional<fs::path>& keep) {
  const Preprocessed pre = preprocess(raw, config);
  Classified classified = classify(pre, models, config);
  if (keep) {
    save_cloud(pre.cloud, *keep / "preprocessed.ply");
    save_cloud(classified.cloud, *keep / "classified.ply");
    save_feature_csv(classified.branch_features, *keep / "features.csv");
  }
  return classified;
}

PointCloud to_input_frame(const PointCloud& cloud, const Classified& c) {
  const Eigen::Isometry3d inverse = c.transform.inverse();
  const double s = c.scale;
  return cloud.transformed([&](const Vec3& p) { return Vec3(inverse * Vec3(p / s)); },
                           inverse.linear());
}

/// Shared tail of skeletonize and pipeline.
void write_skeleton(const Classified& classified, const PointCloud* raw,
                    const PipelineConfig& config, const fs::path& dir, std::ostream& out) {
  const SkeletonRun run = skeletonize(classified, config);
  const SkeletonResult& sk = run.skeleton;
  const SkeletonGraph graph = to_input_frame(sk.graph, classified.transform, classified.scale);
  graph.validate();
  write_json(dir / "skeleton.json", skeleton_to_json(graph, sk.node_labels, sk.labels.lb_count));
  write_text(dir / "skeleton.dot", skeleton_to_dot(graph, sk.node_labels));

  PointCloud labeled;
  BranchLabeling labels;
  if (raw) {
    labels = transfer_labels(*raw, classified.cloud, run.cloud_labels);
    labeled = labeled_output(*raw, labels);
  } else {
    labels = run.cloud_labels;
    labeled = labeled_output(to_input_frame(classified.cloud, classified), labels);
  }
  save_cloud(labeled, dir / "labeled.ply");

  std::size_t rest = 0;
  for (int b : labels.branch_id) rest += b == BranchLabeling::kRest ? 1 : 0;
  const double rest_pct = labels.branch_id.empty()
                              ? 0.0
                              : 100.0 * static_cast<double>(rest) / labels.branch_id.size();
  out << "skeleton: " << graph.nodes.size() << " nodes, " << graph.nodes.size() - 1
      << " edges, " << sk.labels.lb_count << " leading branches, " << graph.leftover.size()
      << " leftover nodes, rest " << format_double(std::round(rest_pct * 100.0) / 100.0)
      << "% of points\n";
}

StageModels train_all(const PointCloud& labeled, const PipelineConfig& config,
                      const fs::path& model_dir, std::ostream& out) {
  make_dir(model_dir);
  StageModels models;
  for (Stage stage : {Stage::ground, Stage::noise, Stage::branches}) {
    TrainedStage trained = train_and_report(labeled, stage, config, out);
    save_forest(trained.forest, model_dir / (stage_name(stage) + ".json"),
                model_extra(stage, trained));
    switch (stage) {
      case Stage::ground: models.ground = std::move(trained.forest); break;
      case Stage::noise: models.noise = std::move(trained.forest); break;
      case Stage::branches: models.branches = std::move(trained.forest); break;
    }
  }
  return models;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"treeskel: skeleton graphs of orchard trees from 3D point clouds"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");
  std::size_t threads = 1;
  app.add_option("--threads", threads, "worker threads for parallel stages")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // synth
  CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic tree");
  std::string synth_spec;
  std::string synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--spec", synth_spec, "tree spec JSON (defaults when omitted)")
      ->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "overrides the spec seed");

  // preprocess
  CLI::App* prep = app.add_subcommand("preprocess", "subsample and align a raw cloud");
  ConfigFlags prep_flags;
  std::string prep_in;
  std::string prep_out;
  prep->add_option("--input", prep_in, "raw cloud (.ply or .xyz/.csv)")->required();
  prep->add_option("--out", prep_out, "output directory")->required();
  add_common_flags(*prep, prep_flags);
  add_preprocess_flags(*prep, prep_flags);

  // train
  CLI::App* train = app.add_subcommand("train", "train one classification stage");
  ConfigFlags train_flags;
  std::string train_in;
  std::string train_stage_name;
  std::string train_model;
  std::string train_report;
  train->add_option("--input", train_in, "raw cloud with a 'class' field")->required();
  train->add_option("--stage", train_stage_name, "1|ground, 2|noise or 3|branches")->required();
  train->add_option("--model", train_model, "model file to write")->required();
  train->add_option("--report", train_report, "directory for confusion.csv and report.json");
  add_common_flags(*train, train_flags);
  add_preprocess_flags(*train, train_flags);
  add_classify_flags(*train, train_flags);
  add_forest_flags(*train, train_flags);

  // classify
  CLI::App* cls = app.add_subcommand("classify", "run the three classification stages");
  ConfigFlags cls_flags;
  std::string cls_in;
  std::string cls_out;
  bool cls_keep = false;
  cls->add_option("--input", cls_in, "raw cloud")->required();
  cls->add_option("--out", cls_out, "output directory")->required();
  cls->add_flag("--keep-intermediate", cls_keep, "also write preprocessed cloud and features");
  add_common_flags(*cls, cls_flags);
  add_preprocess_flags(*cls, cls_flags);
  add_classify_flags(*cls, cls_flags);

  // skeletonize
  CLI::App* skel = app.add_subcommand("skeletonize", "build the skeleton graph");
  ConfigFlags skel_flags;
  std::string skel_in;
  std::string skel_out;
  bool skel_keep = false;
  skel->add_option("--input", skel_in, "classified cloud, or raw cloud plus models")->required();
  skel->add_option("--out", skel_out, "output directory")->required();
  skel->add_flag("--keep-intermediate", skel_keep, "also write intermediate clouds");
  add_common_flags(*skel, skel_flags);
  add_preprocess_flags(*skel, skel_flags);
  add_classify_flags(*skel, skel_flags);
  add_skeleton_flags(*skel, skel_flags);

  // evaluate
  CLI::App* eval = app.add_subcommand("evaluate", "compare a skeleton against a reference");
  ConfigFlags eval_flags;
  std::string eval_computed;
  std::string eval_reference;
  std::string eval_computed_labels;
  std::string eval_reference_labels;
  std::string eval_out;
  eval->add_option("--computed", eval_computed, "computed skeleton JSON")->required();
  eval->add_option("--reference", eval_reference, "reference skeleton JSON")->required();
  eval->add_option("--computed-labels", eval_computed_labels, "labeled cloud of the run");
  eval->add_option("--reference-labels", eval_reference_labels, "reference labeled cloud");
  eval->add_option("--out", eval_out, "directory for report.json");
  add_common_flags(*eval, eval_flags);
  eval_flags.bind(*eval, "match-radius-mm", &PipelineConfig::match_radius_mm,
                  "node matching radius");

  // pipeline
  CLI::App* pipe = app.add_subcommand("pipeline", "classify and skeletonize in one run");
  ConfigFlags pipe_flags;
  std::string pipe_in;
  std::string pipe_out;
  std::string pipe_training;
  bool pipe_keep = false;
  pipe->add_option("--input", pipe_in, "raw cloud")->required();
  pipe->add_option("--out", pipe_out, "output directory")->required();
  pipe->add_option("--training-cloud", pipe_training,
                   "labeled cloud; trains all stages before the run");
  pipe->add_flag("--keep-intermediate", pipe_keep, "also write intermediate clouds");
  add_common_flags(*pipe, pipe_flags);
  add_preprocess_flags(*pipe, pipe_flags);
  add_classify_flags(*pipe, pipe_flags);
  add_forest_flags(*pipe, pipe_flags);
  add_skeleton_flags(*pipe, pipe_flags);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    set_max_threads(threads);
    if (synth->parsed()) {
      TreeSpec spec = synth_spec.empty() ? TreeSpec{} : load_tree_spec(synth_spec);
      if (synth_seed) spec.seed = *synth_seed;
      spec.validate();
      const GroundTruth truth = generate_tree(spec);
      make_dir(synth_out);
      save_ground_truth(truth, synth_out);
      write_json(fs::path(synth_out) / "spec.json", Json(spec));
      out << "synth: " << truth.cloud.size() << " points, " << truth.branch_count
          << " branches, " << truth.skeleton.size() << " reference nodes, "
          << truth.labels.lb_count << " leading branches\n";
    } else if (prep->parsed()) {
      const PipelineConfig config = prep_flags.resolve();
      const PointCloud raw = load_cloud(prep_in);
      const Preprocessed pre = preprocess(raw, config);
      make_dir(prep_out);
      echo_config(prep_out, config);
      save_cloud(pre.cloud, fs::path(prep_out) / "preprocessed.ply");
      Json plane;
      plane["plane"] = pre.plane;
      write_json(fs::path(prep_out) / "plane.json", plane);
      out << "preprocess: " << raw.size() << " -> " << pre.cloud.size() << " points\n";
    } else if (train->parsed()) {
      const PipelineConfig config = train_flags.resolve();
      const Stage stage = parse_stage(train_stage_name);
      const PointCloud labeled = load_cloud(train_in);
      const TrainedStage trained = train_and_report(labeled, stage, config, out);
      const fs::path model_path(train_model);
      if (model_path.has_parent_path()) make_dir(model_path.parent_path());
      save_forest(trained.forest, model_path, model_extra(stage, trained));
      if (!train_report.empty()) {
        make_dir(train_report);
        echo_config(train_report, config);
        write_text(fs::path(train_report) / "confusion.csv",
                   confusion_csv(trained.validation.matrix, trained.validation.class_names));
        write_json(fs::path(train_report) / "report.json", report_json(trained.validation));
      }
    } else if (cls->parsed()) {
      const PipelineConfig config = cls_flags.resolve();
      const StageModels models = load_models(config);
      const PointCloud raw = load_cloud(cls_in);
      make_dir(cls_out);
      echo_config(cls_out, config);
      const Classified c = run_classification(
          raw, models, config, cls_keep ? std::optional<fs::path>(cls_out) : std::nullopt);
      save_cloud(c.cloud, fs::path(cls_out) / "classified.ply");
      std::array<std::size_t, 4> counts{};
      for (auto v : c.cloud.int_field(kClassField)) ++counts[static_cast<std::size_t>(v)];
      out << "classify: ground " << counts[0] << ", noise " << counts[1] << ", major "
          << counts[2] << ", minor " << counts[3] << "; trunk radius "
          << format_double(c.trunk.radius) << " m\n";
    } else if (skel->parsed()) {
      const PipelineConfig config = skel_flags.resolve();
      const PointCloud input = load_cloud(skel_in);
      make_dir(skel_out);
      echo_config(skel_out, config);
      if (is_classified(input)) {
        write_skeleton(classified_from_cloud(input), nullptr, config, skel_out, out);
      } else {
        const StageModels models = load_models(config);
        const Classified c =
            run_classification(input, models, config,
                               skel_keep ? std::optional<fs::path>(skel_out) : std::nullopt);
        write_skeleton(c, &input, config, skel_out, out);
      }
    } else if (eval->parsed()) {
      const PipelineConfig config = eval_flags.resolve();
      if (eval_computed_labels.empty() != eval_reference_labels.empty()) {
        throw ParameterError("give both --computed-labels and --reference-labels, or neither");
      }
      const EvalGraph computed = load_eval_graph(eval_computed);
      const EvalGraph reference = load_eval_graph(eval_reference);
      const MatchReport graph =
          compare_graphs(computed, reference, config.match_radius_mm / 1000.0);
      PointAssignmentReport points;
      if (!eval_computed_labels.empty()) {
        points = score_point_assignment(labeling_from_cloud(load_cloud(eval_computed_labels)),
                                        labeling_from_cloud(load_cloud(eval_reference_labels)));
      }
      const bool with_points = !eval_computed_labels.empty();
      Json report = report_to_json(graph, points);
      if (!with_points) report.erase("points");
      if (!eval_out.empty()) {
        make_dir(eval_out);
        echo_config(eval_out, config);
        write_json(fs::path(eval_out) / "report.json", report);
      }
      if (with_points) {
        out << report_to_table(graph, points);
      } else {
        out << "nodes true " << percent_text(graph.nodes.percent()) << "%, edges true "
            << percent_text(graph.edges.percent()) << "%, length-weighted "
            << percent_text(graph.edges_length_weighted_pct) << "%\n";
      }
    } else if (pipe->parsed()) {
      const PipelineConfig config = pipe_flags.resolve();
      const PointCloud raw = load_cloud(pipe_in);
      make_dir(pipe_out);
      echo_config(pipe_out, config);
      const StageModels models =
          pipe_training.empty()
              ? load_models(config)
              : train_all(load_cloud(pipe_training), config, fs::path(pipe_out) / "models", out);
      const Classified c = run_classification(
          raw, models, config, pipe_keep ? std::optional<fs::path>(pipe_out) : std::nullopt);
      write_skeleton(c, &raw, config, pipe_out, out);
    }
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const FitError& e) {
    err << "error: " << e.what() << "\n";
    return kAlgorithm;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kAlgorithm;
  }
  return kOk;
}

}  // namespace treeskel::cli
