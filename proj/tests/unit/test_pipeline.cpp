// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "treeskel/cloud_io.hpp"
#include "treeskel/error.hpp"
#include "treeskel/evaluation.hpp"
#include "treeskel/pipeline.hpp"
#include "treeskel/synthetic.hpp"

namespace treeskel {
namespace {

TEST(Config, JsonRoundTripAndUnknownKeys) {
  PipelineConfig c;
  c.subsample_mm = 4.0;
  c.seed = 99;
  c.branches_model = "m.json";
  nlohmann::ordered_json j = c;
  const PipelineConfig back = j.get<PipelineConfig>();
  EXPECT_EQ(nlohmann::ordered_json(back).dump(), j.dump());
  j["subsample_cm"] = 1;
  EXPECT_THROW(j.get<PipelineConfig>(), ParameterError);

  testing::TempDir dir("config");
  std::ofstream(dir.path() / "c.json") << R"({"sor_k": 0})";
  EXPECT_THROW(load_config(dir.path() / "c.json"), ParameterError);
  std::ofstream(dir.path() / "d.json") << "{";
  EXPECT_THROW(load_config(dir.path() / "d.json"), DataError);
  EXPECT_THROW(load_config(dir.path() / "missing.json"), DataError);
}

TEST(Config, DerivedParametersConvertUnits) {
  PipelineConfig c;
  const SkeletonParams s = c.skeleton_params();
  EXPECT_DOUBLE_EQ(s.trunk_distance, 0.05);
  EXPECT_DOUBLE_EQ(s.edge_max, 0.03);
  EXPECT_DOUBLE_EQ(s.voxel_size, 0.01);
  EXPECT_DOUBLE_EQ(c.plane_ransac().distance_threshold, 0.01);
  EXPECT_NE(c.forest_params(Stage::ground).seed, c.forest_params(Stage::branches).seed);
  c.train_fraction = 1.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Transfer, DroppedPointsTakeTheNearestUnfilteredLabel) {
  std::mt19937_64 rng(1);
  for (int instance = 0; instance < 20; ++instance) {
    const auto pts = testing::random_points(rng, 400, 1.0);
    const PointCloud raw = testing::cloud_from(pts);
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (rng() % 3 == 0) kept.push_back(i);
    }
    PointCloud pre = raw.subset(kept);
    pre.set_field(kInputIndexField, IntField(kept.begin(), kept.end()));
    IntField filtered(kept.size());
    BranchLabeling labels;
    labels.lb_count = 2;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      filtered[k] = rng() % 4 == 0;
      labels.branch_id.push_back(static_cast<int>(rng() % 5) - 1);
    }
    pre.set_field(kFilteredField, filtered);
    const BranchLabeling out = transfer_labels(raw, pre, labels);
    ASSERT_EQ(out.branch_id.size(), raw.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (k < kept.size() && kept[k] == i) {
        EXPECT_EQ(out.branch_id[i], labels.branch_id[k]);
        ++k;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      int expected = BranchLabeling::kRest;
      for (std::size_t m = 0; m < kept.size(); ++m) {
        if (filtered[m]) continue;
        const double d = (pts[i] - pts[kept[m]]).squaredNorm();
        if (d < best) {
          best = d;
          expected = labels.branch_id[m];
        }
      }
      EXPECT_EQ(out.branch_id[i], expected);
    }
  }
}

TEST(Transfer, RejectsMismatchedInputs) {
  const PointCloud raw = testing::cloud_from({Vec3::Zero(), Vec3::Ones()});
  PointCloud pre = raw.subset(std::vector<std::size_t>{0});
  pre.set_field(kInputIndexField, IntField{5});
  BranchLabeling labels;
  labels.branch_id = {0};
  EXPECT_THROW(transfer_labels(raw, pre, labels), DataError);
  labels.branch_id = {0, 0};
  EXPECT_THROW(transfer_labels(raw, pre, labels), DataError);
}

TEST(Frames, InputFrameInvertsAlignmentAndScale) {
  SkeletonGraph g;
  ClusterNode n;
  n.centroid = Vec3(1, 2, 3);
  g.nodes = {n};
  g.parent = {-1};
  g.edge_length = {0.4};
  g.path_cost = {0.8};
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.rotate(Eigen::AngleAxisd(0.7, Vec3(0, 1, 1).normalized()));
  t.pretranslate(Vec3(0.5, -1, 2));
  const SkeletonGraph out = to_input_frame(g, t, 2.0);
  EXPECT_LT((2.0 * (t * out.nodes[0].centroid) - n.centroid).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(out.edge_length[0], 0.2);
  EXPECT_DOUBLE_EQ(out.path_cost[0], 0.4);
  EXPECT_THROW(to_input_frame(g, t, 0.0), ParameterError);
}

TEST(Output, LabeledCloudKeepsPositionsAndColors) {
  std::vector<Point> pts(3);
  for (int i = 0; i < 3; ++i) {
    pts[static_cast<std::size_t>(i)].position = Vec3(i, 0, 0);
    pts[static_cast<std::size_t>(i)].source_id = i;
    pts[static_cast<std::size_t>(i)].color = Rgb{10, 20, static_cast<std::uint8_t>(i)};
  }
  PointCloud raw(pts);
  raw.set_field("class", IntField{0, 1, 2});
  BranchLabeling labels;
  labels.branch_id = {0, 1, -1};
  labels.lb_count = 1;
  const PointCloud out = labeled_output(raw, labels);
  EXPECT_FALSE(out.has_field("class"));
  EXPECT_EQ(out[2].color->b, 2);
  EXPECT_EQ(labeling_from_cloud(out).branch_id, labels.branch_id);
}

class EndToEnd : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    TreeSpec train_spec;
    train_spec.seed = 31;
    config_ = new PipelineConfig();
    config_->n_trees = 25;
    config_->max_training_samples = 8000;
    models_ = new StageModels();
    const GroundTruth train = generate_tree(train_spec);
    models_->ground = train_stage(train.cloud, Stage::ground, *config_).forest;
    models_->noise = train_stage(train.cloud, Stage::noise, *config_).forest;
    models_->branches = train_stage(train.cloud, Stage::branches, *config_).forest;
    TreeSpec test_spec = train_spec;
    test_spec.seed = 32;
    truth_ = new GroundTruth(generate_tree(test_spec));
  }
  static void TearDownTestSuite() {
    delete config_;
    delete models_;
    delete truth_;
  }
  static PipelineConfig* config_;
  static StageModels* models_;
  static GroundTruth* truth_;
};

PipelineConfig* EndToEnd::config_ = nullptr;
StageModels* EndToEnd::models_ = nullptr;
GroundTruth* EndToEnd::truth_ = nullptr;

TEST_F(EndToEnd, ClassifiedCloudSurvivesDisk) {
  const Preprocessed pre = preprocess(truth_->cloud, *config_);
  const Classified c = classify(pre, *models_, *config_);
  EXPECT_TRUE(is_classified(c.cloud));
  testing::TempDir dir("classified");
  save_cloud(c.cloud, dir.path() / "c.ply");
  const Classified back = classified_from_cloud(load_cloud(dir.path() / "c.ply"));
  EXPECT_LT((back.trunk.axis_point - c.trunk.axis_point).norm(), 1e-9);
  EXPECT_NEAR(back.trunk.radius, c.trunk.radius, 1e-12);
  EXPECT_LT((back.transform.matrix() - c.transform.matrix()).norm(), 1e-9);
  EXPECT_EQ(back.cloud.int_field(kClassField), c.cloud.int_field(kClassField));
  EXPECT_THROW(classified_from_cloud(truth_->cloud), DataError);
}

TEST_F(EndToEnd, SkeletonMatchesReference) {
  const Preprocessed pre = preprocess(truth_->cloud, *config_);
  const Classified c = classify(pre, *models_, *config_);
  const SkeletonRun run = skeletonize(c, *config_);
  EXPECT_NO_THROW(run.skeleton.graph.validate());
  const SkeletonGraph graph = to_input_frame(run.skeleton.graph, c.transform, c.scale);
  const MatchReport m = compare_graphs(eval_graph(graph, run.skeleton.node_labels), truth_->skeleton, 0.05);
  EXPECT_GE(*m.nodes.percent(), 70.0);
  const BranchLabeling labels = transfer_labels(truth_->cloud, c.cloud, run.cloud_labels);
  const PointAssignmentReport p = score_point_assignment(labels, truth_->labels);
  EXPECT_GE(*p.overall, 0.85);
}

TEST_F(EndToEnd, MissingModelIsReported) {
  StageModels partial;
  partial.ground = models_->ground;
  const Preprocessed pre = preprocess(truth_->cloud, *config_);
  EXPECT_THROW(classify(pre, partial, *config_), DataError);
}

}  // namespace
}  // namespace treeskel
