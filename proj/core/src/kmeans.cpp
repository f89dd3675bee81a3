// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "treeskel/error.hpp"
#include "treeskel/parallel.hpp"
#include "treeskel/seed.hpp"

namespace treeskel {
namespace {

constexpr double kSlack = 1e-9;

// Strictly-nearest test with room for rounding in the maintained bounds.
bool safely_below(double upper, double bound) {
  return upper * (1.0 + kSlack) < bound * (1.0 - kSlack);
}

struct Nearest {
  int best = 0;
  double best_dist = 0.0;
  double second_dist = std::numeric_limits<double>::infinity();
};

Nearest nearest_two(const Vec3& p, const std::vector<Vec3>& centers) {
  Nearest n;
  n.best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const double d = (p - centers[j]).squaredNorm();
    if (d < n.best_dist) {
      n.second_dist = n.best_dist;
      n.best_dist = d;
      n.best = static_cast<int>(j);
    } else if (d < n.second_dist) {
      n.second_dist = d;
    }
  }
  n.best_dist = std::sqrt(n.best_dist);
  n.second_dist = std::sqrt(n.second_dist);
  return n;
}

// Means of the current assignment; empty clusters take the point farthest
// from its own center among clusters with more than one member.
void update_centers(std::span<const Vec3> points, std::vector<int>& assignment,
                    std::vector<Vec3>& centers, bool& reseeded) {
  const std::size_t k = centers.size();
  std::vector<std::size_t> count(k, 0);
  for (int a : assignment) ++count[static_cast<std::size_t>(a)];
  for (std::size_t j = 0; j < k; ++j) {
    if (count[j] > 0) continue;
    reseeded = true;
    std::size_t far = points.size();
    double far_dist = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto a = static_cast<std::size_t>(assignment[i]);
      if (count[a] < 2) continue;
      const double d = (points[i] - centers[a]).squaredNorm();
      if (d > far_dist) {
        far_dist = d;
        far = i;
      }
    }
    --count[static_cast<std::size_t>(assignment[far])];
    assignment[far] = static_cast<int>(j);
    count[j] = 1;
    centers[j] = points[far];
  }
  std::vector<Vec3> sum(k, Vec3::Zero());
  for (std::size_t i = 0; i < points.size(); ++i) {
    sum[static_cast<std::size_t>(assignment[i])] += points[i];
  }
  for (std::size_t j = 0; j < k; ++j) centers[j] = sum[j] / static_cast<double>(count[j]);
}

double inertia_of(std::span<const Vec3> points, const std::vector<int>& assignment,
                  const std::vector<Vec3>& centers) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    total += (points[i] - centers[static_cast<std::size_t>(assignment[i])]).squaredNorm();
  }
  return total;
}

}  // namespace

std::vector<Vec3> kmeans_plus_plus(std::span<const Vec3> points, std::size_t k,
                                   std::uint64_t seed) {
  if (k == 0 || k > points.size()) {
    throw ParameterError("k must lie in [1, number of points]");
  }
  std::mt19937_64 rng(seed);
  std::vector<Vec3> centers;
  centers.reserve(k);
  std::uniform_int_distribution<std::size_t> first(0, points.size() - 1);
  centers.push_back(points[first(rng)]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = (points[i] - centers[0]).squaredNorm();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);  // all points coincide with chosen centers
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], (points[i] - centers.back()).squaredNorm());
    }
  }
  return centers;
}

KMeansResult lloyd(std::span<const Vec3> points, std::vector<Vec3> centers, int max_iterations) {
  const std::size_t n = points.size();
  const std::size_t k = centers.size();
  if (k == 0 || k > n) throw ParameterError("k must lie in [1, number of points]");

  KMeansResult out;
  out.assignment.resize(n);
  std::vector<double> upper(n), lower(n);
  auto full_pass = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const Nearest near = nearest_two(points[i], centers);
      out.assignment[i] = near.best;
      upper[i] = near.best_dist;
      lower[i] = near.second_dist;
    }
  };
  full_pass();

  std::vector<double> half_gap(k), moved(k);
  for (int iter = 0; iter < max_iterations; ++iter) {
    out.iterations = iter + 1;
    const std::vector<Vec3> previous = centers;
    bool reseeded = false;
    update_centers(points, out.assignment, centers, reseeded);
    if (reseeded) {
      full_pass();
      continue;
    }

    double max_move = 0.0, second_move = 0.0;
    std::size_t max_j = 0;
    for (std::size_t j = 0; j < k; ++j) {
      moved[j] = (centers[j] - previous[j]).norm();
      if (moved[j] > max_move) {
        second_move = max_move;
        max_move = moved[j];
        max_j = j;
      } else if (moved[j] > second_move) {
        second_move = moved[j];
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      double closest = std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < k; ++l) {
        if (l != j) closest = std::min(closest, (centers[j] - centers[l]).norm());
      }
      half_gap[j] = 0.5 * closest;
    }

    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = static_cast<std::size_t>(out.assignment[i]);
      upper[i] += moved[a];
      lower[i] -= (a == max_j ? second_move : max_move);
      const double bound = std::max(half_gap[a], lower[i]);
      if (safely_below(upper[i], bound)) continue;
      upper[i] = (points[i] - centers[a]).norm();
      if (safely_below(upper[i], bound)) continue;
      const Nearest near = nearest_two(points[i], centers);
      if (near.best != out.assignment[i]) ++changed;
      out.assignment[i] = near.best;
      upper[i] = near.best_dist;
      lower[i] = near.second_dist;
    }
    if (changed == 0) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) {
    bool reseeded = false;
    update_centers(points, out.assignment, centers, reseeded);
  }
  out.inertia = inertia_of(points, out.assignment, centers);
  out.centroids = std::move(centers);
  return out;
}

KMeansResult kmeans(std::span<const Vec3> points, std::size_t k, const KMeansParams& params) {
  if (k == 0 || k > points.size()) {
    throw ParameterError("k = " + std::to_string(k) + " is invalid for " +
                         std::to_string(points.size()) + " points");
  }
  if (params.restarts < 1 || params.max_iterations < 1) {
    throw ParameterError("k-means restarts and iterations must be positive");
  }
  std::vector<KMeansResult> runs(static_cast<std::size_t>(params.restarts));
  parallel_for(runs.size(), [&](std::size_t r) {
    runs[r] = lloyd(points, kmeans_plus_plus(points, k, mix_seed(params.seed, r)),
                    params.max_iterations);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }
  return std::move(runs[best]);
}

}  // namespace treeskel
