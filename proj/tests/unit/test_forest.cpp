// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "treeskel/error.hpp"
#include "treeskel/forest.hpp"
#include "treeskel/parallel.hpp"

namespace treeskel {
namespace {

Dataset xor_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.class_names = {"even", "odd"};
  d.features.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = u(rng), y = u(rng);
    d.features(static_cast<Eigen::Index>(i), 0) = x;
    d.features(static_cast<Eigen::Index>(i), 1) = y;
    d.labels.push_back((x > 0.5) != (y > 0.5) ? 1 : 0);
  }
  return d;
}

double accuracy(const RandomForest& f, const Dataset& d) {
  const auto predicted = f.predict_all(d.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) hits += predicted[i] == d.labels[i];
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

TEST(Forest, LearnsXor) {
  const Dataset train = xor_data(2000, 1);
  const Dataset test = xor_data(2000, 2);
  const RandomForest f = RandomForest::train(train, {100, 30, 2, 0, 5});
  EXPECT_GE(accuracy(f, test), 0.95);
}

TEST(Forest, DeterministicAcrossThreadCounts) {
  const Dataset train = xor_data(500, 3);
  set_max_threads(1);
  nlohmann::ordered_json a = RandomForest::train(train, {20, 30, 2, 0, 9});
  set_max_threads(4);
  nlohmann::ordered_json b = RandomForest::train(train, {20, 30, 2, 0, 9});
  set_max_threads(1);
  EXPECT_EQ(a.dump(), b.dump());
  nlohmann::ordered_json c = RandomForest::train(train, {20, 30, 2, 0, 10});
  EXPECT_NE(a.dump(), c.dump());
}

TEST(Forest, JsonRoundTripPredictsIdentically) {
  const Dataset train = xor_data(400, 4);
  const RandomForest f = RandomForest::train(train, {15, 8, 4, 1, 2});
  testing::TempDir dir("forest");
  save_forest(f, dir.path() / "m.json", {{"stage", 3}});
  const RandomForest g = load_forest(dir.path() / "m.json");
  EXPECT_EQ(g.params().max_depth, 8);
  EXPECT_EQ(g.class_names(), f.class_names());
  const Dataset test = xor_data(300, 5);
  for (Eigen::Index i = 0; i < test.features.rows(); ++i) {
    const Eigen::RowVectorXd row = test.features.row(i);
    const auto p = f.predict({row.data(), 2});
    const auto q = g.predict({row.data(), 2});
    EXPECT_EQ(p.probability, q.probability);
  }
}

TEST(Forest, RejectsMalformedModels) {
  EXPECT_THROW(RandomForest::train(xor_data(50, 1), {0, 30, 2, 0, 0}), ParameterError);
  nlohmann::ordered_json j = RandomForest::train(xor_data(50, 1), {2, 30, 2, 0, 0});
  j["trees"][0]["left"][0] = 1000;
  RandomForest f;
  EXPECT_THROW(from_json(j, f), DataError);
  j["format"] = "other";
  EXPECT_THROW(from_json(j, f), DataError);
  const RandomForest g = RandomForest::train(xor_data(50, 1), {2, 30, 2, 0, 0});
  const std::vector<double> short_row = {0.1};
  EXPECT_THROW(g.predict(short_row), DataError);
}

/// Weighted Gini impurity of splitting x at t.
double split_impurity(const std::vector<double>& x, const std::vector<int>& y, double t) {
  std::map<int, int> l, r;
  int nl = 0, nr = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] <= t) {
      ++l[y[k]];
      ++nl;
    } else {
      ++r[y[k]];
      ++nr;
    }
  }
  auto gini = [](const std::map<int, int>& c, int n) {
    double s = 1.0;
    for (auto [k, v] : c) s -= (double(v) / n) * (double(v) / n);
    return s;
  };
  return (nl * gini(l, nl) + nr * gini(r, nr)) / double(x.size());
}

/// Minimum impurity over every midpoint between distinct values.
double brute_best_impurity(const std::vector<double>& x, const std::vector<int>& y) {
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  double best = 1e9;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    if (sorted[i] == sorted[i + 1]) continue;
    best = std::min(best, split_impurity(x, y, sorted[i] + (sorted[i + 1] - sorted[i]) / 2.0));
  }
  return best;
}

TEST(DecisionTree, RootSplitMatchesExhaustiveGiniScan) {
  std::mt19937_64 rng(6);
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t n = 10 + rng() % 60;
    Dataset d;
    d.class_names = {"a", "b", "c"};
    d.features.resize(static_cast<Eigen::Index>(n), 1);
    std::vector<double> x(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % 40) / 10.0;
      y[i] = static_cast<int>(rng() % 3);
      d.features(static_cast<Eigen::Index>(i), 0) = x[i];
    }
    d.labels = y;
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    const DecisionTree t = DecisionTree::train(d, rows, {1, 1, 2, 1, 0}, rng());
    ASSERT_GE(t.nodes().size(), 1u);
    if (t.nodes()[0].feature < 0) continue;  // labels were pure
    const double t0 = t.nodes()[0].threshold;
    EXPECT_NEAR(split_impurity(x, y, t0), brute_best_impurity(x, y), 1e-12) << instance;
    // The threshold sits halfway between two adjacent distinct values.
    const double below = *std::max_element(x.begin(), x.end(), [&](double a, double b) {
      return (a <= t0 ? a : -1e9) < (b <= t0 ? b : -1e9);
    });
    double above = 1e9;
    for (double v : x) {
      if (v > t0) above = std::min(above, v);
    }
    EXPECT_DOUBLE_EQ(t0, below + (above - below) / 2.0);
  }
}

TEST(DecisionTree, FullyGrownTreeFitsDistinctTrainingRows) {
  const Dataset d = xor_data(300, 7);
  std::vector<std::size_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), 0);
  const DecisionTree t = DecisionTree::train(d, rows, {1, 100, 2, 2, 0}, 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Eigen::RowVectorXd row = d.features.row(static_cast<Eigen::Index>(i));
    const auto& dist = t.predict_distribution({row.data(), 2});
    EXPECT_DOUBLE_EQ(dist[static_cast<std::size_t>(d.labels[i])], 1.0);
  }
}

TEST(DecisionTree, LeafDistributionsAreClassFrequencies) {
  Dataset d;
  d.class_names = {"a", "b"};
  d.features.resize(5, 1);
  d.features << 1, 1, 1, 1, 1;
  d.labels = {0, 1, 1, 1, 0};
  const std::vector<std::size_t> rows = {0, 1, 2, 3, 4};
  const DecisionTree t = DecisionTree::train(d, rows, {1, 10, 2, 1, 0}, 0);
  ASSERT_EQ(t.nodes().size(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes()[0].distribution[0], 0.4);
  EXPECT_DOUBLE_EQ(t.nodes()[0].distribution[1], 0.6);
  EXPECT_EQ(t.depth(), 0);
}

Dataset imbalanced() {
  Dataset d;
  d.class_names = {"a", "b", "c"};
  const std::vector<int> sizes = {500, 80, 3};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < sizes[static_cast<std::size_t>(c)]; ++i) d.labels.push_back(c);
  }
  d.features.resize(static_cast<Eigen::Index>(d.labels.size()), 1);
  for (Eigen::Index i = 0; i < d.features.rows(); ++i) d.features(i, 0) = static_cast<double>(i);
  return d;
}

std::vector<int> class_sizes(const Dataset& d) {
  std::vector<int> out(d.num_classes(), 0);
  for (int l : d.labels) ++out[static_cast<std::size_t>(l)];
  return out;
}

TEST(Split, StratifiedAndDisjoint) {
  const Dataset d = imbalanced();
  const auto [train, validation] = split_train_validation(d, 0.7, 3);
  EXPECT_EQ(class_sizes(train), (std::vector<int>{350, 56, 2}));
  EXPECT_EQ(class_sizes(validation), (std::vector<int>{150, 24, 1}));
  std::vector<double> ids;
  for (Eigen::Index i = 0; i < train.features.rows(); ++i) ids.push_back(train.features(i, 0));
  for (Eigen::Index i = 0; i < validation.features.rows(); ++i) ids.push_back(validation.features(i, 0));
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
  EXPECT_EQ(ids.size(), d.size());
  Dataset single;
  single.class_names = {"a", "b"};
  single.features.resize(3, 1);
  single.features << 0, 1, 2;
  single.labels = {0, 0, 1};
  EXPECT_THROW(split_train_validation(single, 0.5, 0), DataError);
  EXPECT_THROW(split_train_validation(d, 1.0, 0), ParameterError);
}

TEST(Split, CapKeepsProportionsAndOrder) {
  const Dataset d = imbalanced();
  const Dataset capped = stratified_cap(d, 100, 4);
  EXPECT_EQ(class_sizes(capped), (std::vector<int>{86, 14, 2}));
  for (Eigen::Index i = 1; i < capped.features.rows(); ++i) {
    EXPECT_LT(capped.features(i - 1, 0), capped.features(i, 0));
  }
  EXPECT_EQ(stratified_cap(d, 10000, 4).size(), d.size());
}

TEST(Confusion, SummaryMatchesHandComputation) {
  ConfusionMatrix m(3);
  m.add(0, 0, 5);
  m.add(0, 1, 1);
  m.add(1, 1, 3);
  m.add(2, 0, 2);
  EXPECT_EQ(m.total(), 11u);
  EXPECT_EQ(m.trace(), 8u);
  const AccuracySummary s = summarize(m);
  EXPECT_DOUBLE_EQ(*s.overall, 8.0 / 11.0);
  EXPECT_DOUBLE_EQ(*s.producers[0], 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(*s.users[0], 5.0 / 7.0);
  EXPECT_DOUBLE_EQ(*s.users[1], 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(*s.producers[2], 0.0);
  EXPECT_FALSE(s.users[2].has_value());
  EXPECT_THROW(m.add(3, 0), DataError);
  EXPECT_FALSE(summarize(ConfusionMatrix(2)).overall.has_value());
}

TEST(Confusion, ReportOutputs) {
  const Dataset d = xor_data(300, 8);
  const RandomForest f = RandomForest::train(d, {10, 30, 2, 0, 1});
  const ClassificationReport r = evaluate(f, d);
  EXPECT_EQ(r.matrix.total(), d.size());
  const std::string csv = confusion_csv(r.matrix, r.class_names);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(report_json(r)["class_names"].size(), 2u);
  EXPECT_NE(report_table(r).find("odd"), std::string::npos);
}

}  // namespace
}  // namespace treeskel
