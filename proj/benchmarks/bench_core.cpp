// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include "treeskel/features.hpp"
#include "treeskel/forest.hpp"
#include "treeskel/kmeans.hpp"
#include "treeskel/parallel.hpp"
#include "treeskel/spatial_index.hpp"
#include "treeskel/synthetic.hpp"

namespace {

using treeskel::Vec3;

std::vector<Vec3> cube(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out(n);
  for (auto& p : out) p = Vec3(u(rng), u(rng), u(rng));
  return out;
}

void BM_RadiusQuery(benchmark::State& state) {
  const auto pts = cube(static_cast<std::size_t>(state.range(0)), 1);
  const treeskel::SpatialIndex index(pts);
  std::vector<treeskel::Neighbor> found;
  std::size_t q = 0;
  for (auto _ : state) {
    index.radius(pts[q++ % pts.size()], 0.05, found);
    benchmark::DoNotOptimize(found.data());
  }
}
BENCHMARK(BM_RadiusQuery)->Arg(10000)->Arg(100000);

void BM_IndexBuild(benchmark::State& state) {
  const auto pts = cube(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) {
    treeskel::SpatialIndex index(pts);
    benchmark::DoNotOptimize(index.size());
  }
}
BENCHMARK(BM_IndexBuild)->Arg(100000);

void BM_BranchFeatures(benchmark::State& state) {
  treeskel::set_max_threads(static_cast<std::size_t>(state.range(0)));
  treeskel::TreeSpec spec;
  spec.point_density = 20000.0;
  spec.ground_density = 0.0;
  spec.sky_noise_count = 0;
  const auto truth = treeskel::generate_tree(spec);
  treeskel::CylinderModel trunk;
  trunk.radius = spec.trunk_radius;
  for (auto _ : state) {
    benchmark::DoNotOptimize(treeskel::compute_all_features(truth.cloud, trunk).data());
  }
  state.counters["points"] = static_cast<double>(truth.cloud.size());
  treeskel::set_max_threads(1);
}
BENCHMARK(BM_BranchFeatures)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
  const auto pts = cube(20000, 3);
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(treeskel::kmeans(pts, k, {1, 100, 7}).inertia);
  }
}
BENCHMARK(BM_KMeans)->Arg(50)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_ForestTrain(benchmark::State& state) {
  const auto pts = cube(5000, 4);
  treeskel::Dataset data;
  data.class_names = {"a", "b"};
  data.features.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    data.features.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    data.labels.push_back(pts[i].norm() < 0.8 ? 0 : 1);
  }
  for (auto _ : state) {
    const auto forest = treeskel::RandomForest::train(data, {static_cast<int>(state.range(0)), 30, 10, 0, 1});
    benchmark::DoNotOptimize(forest.trees().size());
  }
}
BENCHMARK(BM_ForestTrain)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
