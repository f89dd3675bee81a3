// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeskel/features.hpp"
#include "treeskel/seed.hpp"

namespace treeskel {

/// Labeled feature table. Labels lie in [0, class_names.size()).
struct Dataset {
  FeatureMatrix features;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
  std::size_t num_features() const noexcept { return static_cast<std::size_t>(features.cols()); }

  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// Stratified split: each class contributes round(fraction * class size)
/// rows to the training side. Throws DataError if a class has < 2 rows.
std::pair<Dataset, Dataset> split_train_validation(const Dataset& data, double train_fraction,
                                                   std::uint64_t seed);

/// Stratified random subsample of at most `max_rows` rows (all rows if
/// the dataset is already small enough). Row order is preserved.
Dataset stratified_cap(const Dataset& data, std::size_t max_rows, std::uint64_t seed);

struct ForestParams {
  int n_trees = 200;
  int max_depth = 30;
  int min_samples_split = 10;
  int features_per_split = 0;  ///< 0 selects floor(sqrt(d))
  std::uint64_t seed = 0;
};

/// CART classification tree with Gini splits. Leaves store class
/// frequencies of the training rows that reached them.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  ///< -1 for leaves
    double threshold = 0.0;
    int left = -1;   ///< rows with value <= threshold
    int right = -1;
    std::vector<double> distribution;  ///< leaves only, sums to 1
  };

  DecisionTree() = default;
  explicit DecisionTree(std::vector<Node> nodes);

  /// Grows a tree on the given row multiset (duplicates allowed).
  static DecisionTree train(const Dataset& data, std::span<const std::size_t> rows,
                            const ForestParams& params, std::uint64_t seed);

  const std::vector<double>& predict_distribution(std::span<const double> row) const;
  int depth() const;
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

struct Prediction {
  int label = 0;
  std::vector<double> probability;
};

class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(std::vector<DecisionTree> trees, std::size_t num_features,
               std::vector<std::string> class_names, ForestParams params = {});

  /// Bootstrap-aggregated training; tree t uses a seed derived from
  /// (params.seed, t), so results do not depend on the thread count.
  static RandomForest train(const Dataset& data, const ForestParams& params);

  /// Mean of leaf distributions; label is the arg-max, lowest index on ties.
  Prediction predict(std::span<const double> row) const;
  std::vector<int> predict_all(const FeatureMatrix& features) const;

  std::size_t num_features() const noexcept { return num_features_; }
  std::size_t num_classes() const noexcept { return class_names_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  const ForestParams& params() const noexcept { return params_; }

 private:
  std::vector<DecisionTree> trees_;
  std::size_t num_features_ = 0;
  std::vector<std::string> class_names_;
  ForestParams params_;
};

void to_json(nlohmann::ordered_json& j, const RandomForest& forest);
void from_json(const nlohmann::ordered_json& j, RandomForest& forest);
void save_forest(const RandomForest& forest, const std::filesystem::path& path,
                 const nlohmann::ordered_json& extra = {});
RandomForest load_forest(const std::filesystem::path& path);

/// Rows are reference classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0);

  void add(int reference, int predicted, std::size_t count = 1);
  std::size_t at(std::size_t reference, std::size_t predicted) const;
  std::size_t classes() const noexcept { return n_; }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t r) const;
  std::size_t col_sum(std::size_t c) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> counts_;
};

struct AccuracySummary {
  std::optional<double> overall;                 ///< trace / total
  std::vector<std::optional<double>> producers;  ///< diag / row sum (recall)
  std::vector<std::optional<double>> users;      ///< diag / column sum (precision)
};

AccuracySummary summarize(const ConfusionMatrix& m);

struct ClassificationReport {
  ConfusionMatrix matrix;
  AccuracySummary accuracy;
  std::vector<std::string> class_names;
};

ClassificationReport evaluate(const RandomForest& forest, const Dataset& data);

std::string confusion_csv(const ConfusionMatrix& m, const std::vector<std::string>& names);
nlohmann::ordered_json report_json(const ClassificationReport& report);
std::string report_table(const ClassificationReport& report);

}  // namespace treeskel
