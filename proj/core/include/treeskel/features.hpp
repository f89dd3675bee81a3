// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "treeskel/geometry.hpp"
#include "treeskel/point_cloud.hpp"
#include "treeskel/spatial_index.hpp"

namespace treeskel {

/// Eigen-decomposition of a neighborhood covariance (population form).
/// values[0] >= values[1] >= values[2] >= 0; vectors[i] pairs with values[i].
/// Neighborhoods with fewer than 3 points report zero eigenvalues and the
/// coordinate axes as vectors.
struct NeighborhoodEigen {
  std::array<double, 3> values = {0.0, 0.0, 0.0};
  std::array<Vec3, 3> vectors = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  std::size_t count = 0;

  bool degenerate() const { return values[0] <= 0.0; }
  /// Smallest-eigenvalue direction with non-negative z.
  Vec3 normal() const;
};

NeighborhoodEigen eigen_of(std::span<const Vec3> points);
NeighborhoodEigen eigen_features(const SpatialIndex& index, const Vec3& p, double r);

// Covariance ratios. All return 0 on degenerate neighborhoods.
double pca1(const NeighborhoodEigen& e);
double pca2(const NeighborhoodEigen& e);
double omnivariance(const NeighborhoodEigen& e);
double linearity(const NeighborhoodEigen& e);
double planarity(const NeighborhoodEigen& e);
double surface_variation(const NeighborhoodEigen& e);
double verticality(const NeighborhoodEigen& e);

inline constexpr std::size_t kFeatureCount = 20;

/// Per-point descriptor. Index k holds feature f(k+1):
///   f1-f4   neighbor counts at 2, 4, 8, 15 cm
///   f5-f7   PCA1 at 2, 4, 8 cm        f8, f9   PCA2 at 2, 8 cm
///   f10-f13 omnivariance at 2, 4, 8, 15 cm
///   f14,f15 linearity at 2, 4 cm      f16      verticality at 15 cm
///   f17     planarity at 8 cm         f18      normal change rate at 8 cm
///   f19     surface variation at 8 cm f20      trunk cylinder distance [m]
using FeatureVector = std::array<double, kFeatureCount>;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kRadius2cm = 0.02;
inline constexpr double kRadius4cm = 0.04;
inline constexpr double kRadius8cm = 0.08;
inline constexpr double kRadius15cm = 0.15;

/// Computes neighbor normals on demand; use compute_all_features for batches.
FeatureVector compute_feature_vector(const SpatialIndex& index, const Vec3& p,
                                     const CylinderModel& trunk);

/// Row i equals compute_feature_vector for point i.
FeatureMatrix compute_all_features(const PointCloud& cloud, const CylinderModel& trunk);
FeatureMatrix compute_all_features(const PointCloud& cloud, const SpatialIndex& index,
                                   const CylinderModel& trunk);

/// Verticality of each point's 15 cm neighborhood.
std::vector<double> verticality_at(const SpatialIndex& index, std::span<const Vec3> points,
                                   double radius);

std::vector<std::string> feature_names();
void save_feature_csv(const FeatureMatrix& features, const std::filesystem::path& path);

}  // namespace treeskel
