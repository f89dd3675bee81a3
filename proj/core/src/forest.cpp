// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "treeskel/error.hpp"
#include "treeskel/parallel.hpp"

namespace treeskel {
namespace {

double gini(std::span<const std::size_t> counts, std::size_t total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

// Grows one tree over rows[begin, end) using an explicit work stack.
class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestParams& params, std::uint64_t seed)
      : data_(data), params_(params), rng_(seed), classes_(data.num_classes()) {
    const auto d = static_cast<int>(data.num_features());
    mtry_ = params.features_per_split > 0
                ? std::min(params.features_per_split, d)
                : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
    feature_order_.resize(static_cast<std::size_t>(d));
    std::iota(feature_order_.begin(), feature_order_.end(), 0);
  }

  std::vector<DecisionTree::Node> build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    nodes_.clear();
    struct Work {
      int node;
      std::size_t begin;
      std::size_t end;
      int depth;
    };
    std::vector<Work> stack;
    nodes_.emplace_back();
    stack.push_back({0, 0, rows_.size(), 0});
    std::vector<std::size_t> counts(classes_);
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t i = w.begin; i < w.end; ++i) ++counts[data_.labels[rows_[i]]];
      const std::size_t n = w.end - w.begin;
      const bool pure = std::count_if(counts.begin(), counts.end(),
                                      [](std::size_t c) { return c > 0; }) <= 1;
      std::optional<Split> split;
      if (!pure && w.depth < params_.max_depth &&
          n >= static_cast<std::size_t>(params_.min_samples_split)) {
        split = best_split(w.begin, w.end);
      }
      if (!split) {
        make_leaf(w.node, counts, n);
        continue;
      }
      const auto mid_it = std::stable_partition(
          rows_.begin() + static_cast<std::ptrdiff_t>(w.begin),
          rows_.begin() + static_cast<std::ptrdiff_t>(w.end), [&](std::size_t r) {
            return data_.features(static_cast<Eigen::Index>(r), split->feature) <= split->threshold;
          });
      const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
      const int left = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      const int right = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      nodes_[w.node].feature = split->feature;
      nodes_[w.node].threshold = split->threshold;
      nodes_[w.node].left = left;
      nodes_[w.node].right = right;
      stack.push_back({right, mid, w.end, w.depth + 1});
      stack.push_back({left, w.begin, mid, w.depth + 1});
    }
    return std::move(nodes_);
  }

 private:
  void make_leaf(int node, const std::vector<std::size_t>& counts, std::size_t n) {
    auto& dist = nodes_[node].distribution;
    dist.assign(classes_, 0.0);
    for (std::size_t c = 0; c < classes_; ++c) {
      dist[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
    }
  }

  std::optional<Split> best_split(std::size_t begin, std::size_t end) {
    std::shuffle(feature_order_.begin(), feature_order_.end(), rng_);
    const std::size_t n = end - begin;
    values_.resize(n);
    std::vector<std::size_t> left(classes_), right(classes_);
    std::optional<Split> best;
    int evaluated = 0;
    for (int feature : feature_order_) {
      if (evaluated >= mtry_) break;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = rows_[begin + i];
        values_[i] = {data_.features(static_cast<Eigen::Index>(r), feature), data_.labels[r]};
      }
      std::sort(values_.begin(), values_.end());
      if (values_.front().first == values_.back().first) continue;  // constant here
      ++evaluated;

      std::fill(left.begin(), left.end(), 0);
      std::fill(right.begin(), right.end(), 0);
      for (const auto& v : values_) ++right[v.second];
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[values_[i].second];
        --right[values_[i].second];
        const double a = values_[i].first;
        const double b = values_[i + 1].first;
        if (!(a < b)) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        const double impurity = (static_cast<double>(nl) * gini(left, nl) +
                                 static_cast<double>(nr) * gini(right, nr)) /
                                static_cast<double>(n);
        if (!best || impurity < best->impurity) {
          double threshold = a + (b - a) / 2.0;
          if (!(threshold < b)) threshold = a;
          best = Split{feature, threshold, impurity};
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  const ForestParams& params_;
  std::mt19937_64 rng_;
  std::size_t classes_;
  int mtry_ = 1;
  std::vector<int> feature_order_;
  std::vector<std::size_t> rows_;
  std::vector<std::pair<double, int>> values_;
  std::vector<DecisionTree::Node> nodes_;
};

void check_params(const ForestParams& p) {
  if (p.n_trees < 1 || p.max_depth < 1 || p.min_samples_split < 1 || p.features_per_split < 0) {
    throw ParameterError("forest parameters must be positive");
  }
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << 100.0 * *v;
  return out.str();
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw DataError("dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DataError("feature rows and labels differ in length");
  }
  if (class_names.empty()) throw DataError("dataset has no classes");
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= class_names.size()) {
      throw DataError("label " + std::to_string(l) + " outside the class range");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.class_names = class_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

std::pair<Dataset, Dataset> split_train_validation(const Dataset& data, double train_fraction,
                                                   std::uint64_t seed) {
  data.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("train fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train, validation;
  for (auto& rows : by_class) {
    if (rows.empty()) continue;
    if (rows.size() < 2) throw DataError("stratified split needs at least 2 rows per class");
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    train.insert(train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    validation.insert(validation.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(validation.begin(), validation.end());
  return {data.subset(train), data.subset(validation)};
}

Dataset stratified_cap(const Dataset& data, std::size_t max_rows, std::uint64_t seed) {
  data.validate();
  if (data.size() <= max_rows) return data;
  std::vector<std::vector<std::size_t>> by_class(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  const double keep = static_cast<double>(max_rows) / static_cast<double>(data.size());
  std::vector<std::size_t> rows;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = std::max<std::size_t>(
        std::min<std::size_t>(2, members.size()),
        static_cast<std::size_t>(std::llround(keep * static_cast<double>(members.size()))));
    rows.insert(rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(rows.begin(), rows.end());
  return data.subset(rows);
}

DecisionTree::DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw DataError("decision tree has no nodes");
  const auto n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.feature >= 0 && (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n)) {
      throw DataError("decision tree child index out of range");
    }
    if (node.feature < 0 && node.distribution.empty()) {
      throw DataError("decision tree leaf without a class distribution");
    }
  }
}

DecisionTree DecisionTree::train(const Dataset& data, std::span<const std::size_t> rows,
                                 const ForestParams& params, std::uint64_t seed) {
  check_params(params);
  if (rows.empty()) throw DataError("cannot grow a tree on zero rows");
  TreeBuilder builder(data, params, seed);
  return DecisionTree(builder.build(std::vector<std::size_t>(rows.begin(), rows.end())));
}

const std::vector<double>& DecisionTree::predict_distribution(std::span<const double> row) const {
  int node = 0;
  while (nodes_[node].feature >= 0) {
    const Node& n = nodes_[node];
    node = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[node].distribution;
}

int DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    const auto [node, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes_[node].feature >= 0) {
      stack.emplace_back(nodes_[node].left, d + 1);
      stack.emplace_back(nodes_[node].right, d + 1);
    }
  }
  return deepest;
}

RandomForest::RandomForest(std::vector<DecisionTree> trees, std::size_t num_features,
                           std::vector<std::string> class_names, ForestParams params)
    : trees_(std::move(trees)),
      num_features_(num_features),
      class_names_(std::move(class_names)),
      params_(params) {
  if (trees_.empty()) throw DataError("forest has no trees");
  for (const auto& tree : trees_) {
    for (const auto& node : tree.nodes()) {
      if (node.feature >= static_cast<int>(num_features_)) {
        throw DataError("tree splits on a feature the forest does not have");
      }
      if (node.feature < 0 && node.distribution.size() != class_names_.size()) {
        throw DataError("leaf distribution does not match the class count");
      }
    }
  }
}

RandomForest RandomForest::train(const Dataset& data, const ForestParams& params) {
  data.validate();
  check_params(params);
  std::vector<DecisionTree> trees(static_cast<std::size_t>(params.n_trees));
  parallel_for(trees.size(), [&](std::size_t t) {
    const std::uint64_t seed = mix_seed(params.seed, t);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    std::vector<std::size_t> bootstrap(data.size());
    for (auto& r : bootstrap) r = pick(rng);
    trees[t] = DecisionTree::train(data, bootstrap, params, mix_seed(seed, 1));
  });
  return RandomForest(std::move(trees), data.num_features(), data.class_names, params);
}

Prediction RandomForest::predict(std::span<const double> row) const {
  if (row.size() != num_features_) {
    throw DataError("feature row has " + std::to_string(row.size()) + " values, forest expects " +
                    std::to_string(num_features_));
  }
  Prediction out;
  out.probability.assign(class_names_.size(), 0.0);
  for (const auto& tree : trees_) {
    const auto& dist = tree.predict_distribution(row);
    for (std::size_t c = 0; c < dist.size(); ++c) out.probability[c] += dist[c];
  }
  for (double& p : out.probability) p /= static_cast<double>(trees_.size());
  out.label = static_cast<int>(std::max_element(out.probability.begin(), out.probability.end()) -
                               out.probability.begin());
  return out;
}

std::vector<int> RandomForest::predict_all(const FeatureMatrix& features) const {
  std::vector<int> labels(static_cast<std::size_t>(features.rows()));
  parallel_for(labels.size(), [&](std::size_t i) {
    const auto row = features.row(static_cast<Eigen::Index>(i));
    labels[i] = predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))).label;
  });
  return labels;
}

void to_json(nlohmann::ordered_json& j, const RandomForest& forest) {
  const auto& p = forest.params();
  j = nlohmann::ordered_json::object();
  j["format"] = "treeskel-random-forest";
  j["version"] = 1;
  j["params"] = {{"n_trees", p.n_trees},
                 {"max_depth", p.max_depth},
                 {"min_samples_split", p.min_samples_split},
                 {"features_per_split", p.features_per_split},
                 {"seed", p.seed}};
  j["num_features"] = forest.num_features();
  j["class_names"] = forest.class_names();
  auto trees = nlohmann::ordered_json::array();
  for (const auto& tree : forest.trees()) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold;
    auto leaves = nlohmann::ordered_json::array();
    for (const auto& node : tree.nodes()) {
      feature.push_back(node.feature);
      threshold.push_back(node.threshold);
      left.push_back(node.left);
      right.push_back(node.right);
      leaves.push_back(node.distribution);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"distribution", leaves}});
  }
  j["trees"] = std::move(trees);
}

void from_json(const nlohmann::ordered_json& j, RandomForest& forest) {
  if (j.value("format", "") != "treeskel-random-forest") {
    throw DataError("not a treeskel random forest model");
  }
  ForestParams p;
  const auto& jp = j.at("params");
  p.n_trees = jp.at("n_trees").get<int>();
  p.max_depth = jp.at("max_depth").get<int>();
  p.min_samples_split = jp.at("min_samples_split").get<int>();
  p.features_per_split = jp.at("features_per_split").get<int>();
  p.seed = jp.at("seed").get<std::uint64_t>();
  std::vector<DecisionTree> trees;
  for (const auto& jt : j.at("trees")) {
    const auto feature = jt.at("feature").get<std::vector<int>>();
    const auto threshold = jt.at("threshold").get<std::vector<double>>();
    const auto left = jt.at("left").get<std::vector<int>>();
    const auto right = jt.at("right").get<std::vector<int>>();
    const auto dist = jt.at("distribution").get<std::vector<std::vector<double>>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || dist.size() != n) {
      throw DataError("tree node arrays differ in length");
    }
    std::vector<DecisionTree::Node> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i] = {feature[i], threshold[i], left[i], right[i], dist[i]};
    }
    trees.emplace_back(std::move(nodes));
  }
  forest = RandomForest(std::move(trees), j.at("num_features").get<std::size_t>(),
                        j.at("class_names").get<std::vector<std::string>>(), p);
}

void save_forest(const RandomForest& forest, const std::filesystem::path& path,
                 const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json j = forest;
  for (const auto& [key, value] : extra.items()) j[key] = value;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump() << '\n';
}

RandomForest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::ordered_json::parse(in).get<RandomForest>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid model file '" + path.string() + "': " + e.what());
  }
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(int reference, int predicted, std::size_t count) {
  if (reference < 0 || predicted < 0 || static_cast<std::size_t>(reference) >= n_ ||
      static_cast<std::size_t>(predicted) >= n_) {
    throw DataError("confusion matrix class out of range");
  }
  counts_[static_cast<std::size_t>(reference) * n_ + static_cast<std::size_t>(predicted)] += count;
}

std::size_t ConfusionMatrix::at(std::size_t reference, std::size_t predicted) const {
  return counts_.at(reference * n_ + predicted);
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < n_; ++i) t += at(i, i);
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t r) const {
  std::size_t s = 0;
  for (std::size_t c = 0; c < n_; ++c) s += at(r, c);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::size_t s = 0;
  for (std::size_t r = 0; r < n_; ++r) s += at(r, c);
  return s;
}

AccuracySummary summarize(const ConfusionMatrix& m) {
  AccuracySummary s;
  const std::size_t total = m.total();
  if (total > 0) s.overall = static_cast<double>(m.trace()) / static_cast<double>(total);
  for (std::size_t c = 0; c < m.classes(); ++c) {
    const std::size_t row = m.row_sum(c);
    const std::size_t col = m.col_sum(c);
    s.producers.push_back(row > 0 ? std::optional<double>(static_cast<double>(m.at(c, c)) / row)
                                  : std::nullopt);
    s.users.push_back(col > 0 ? std::optional<double>(static_cast<double>(m.at(c, c)) / col)
                              : std::nullopt);
  }
  return s;
}

ClassificationReport evaluate(const RandomForest& forest, const Dataset& data) {
  data.validate();
  ClassificationReport report{ConfusionMatrix(forest.num_classes()), {}, forest.class_names()};
  const auto predicted = forest.predict_all(data.features);
  for (std::size_t i = 0; i < data.size(); ++i) report.matrix.add(data.labels[i], predicted[i]);
  report.accuracy = summarize(report.matrix);
  return report;
}

std::string confusion_csv(const ConfusionMatrix& m, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "reference\\predicted";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < m.classes(); ++r) {
    out << names.at(r);
    for (std::size_t c = 0; c < m.classes(); ++c) out << ',' << m.at(r, c);
    out << '\n';
  }
  return out.str();
}

nlohmann::ordered_json report_json(const ClassificationReport& report) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(100.0 * *v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["class_names"] = report.class_names;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < report.matrix.classes(); ++r) {
    std::vector<std::size_t> row;
    for (std::size_t c = 0; c < report.matrix.classes(); ++c) row.push_back(report.matrix.at(r, c));
    rows.push_back(row);
  }
  j["confusion_matrix"] = rows;
  j["overall_accuracy_pct"] = opt(report.accuracy.overall);
  auto pa = nlohmann::ordered_json::array();
  auto ua = nlohmann::ordered_json::array();
  for (const auto& v : report.accuracy.producers) pa.push_back(opt(v));
  for (const auto& v : report.accuracy.users) ua.push_back(opt(v));
  j["producers_accuracy_pct"] = pa;
  j["users_accuracy_pct"] = ua;
  return j;
}

std::string report_table(const ClassificationReport& report) {
  std::ostringstream out;
  const auto& names = report.class_names;
  out << std::setw(12) << "ref\\pred";
  for (const auto& n : names) out << std::setw(10) << n;
  out << std::setw(10) << "PA[%]" << '\n';
  for (std::size_t r = 0; r < names.size(); ++r) {
    out << std::setw(12) << names[r];
    for (std::size_t c = 0; c < names.size(); ++c) out << std::setw(10) << report.matrix.at(r, c);
    out << std::setw(10) << percent(report.accuracy.producers[r]) << '\n';
  }
  out << std::setw(12) << "UA[%]";
  for (const auto& v : report.accuracy.users) out << std::setw(10) << percent(v);
  out << "\nOA: " << percent(report.accuracy.overall) << " %\n";
  return out.str();
}

}  // namespace treeskel
