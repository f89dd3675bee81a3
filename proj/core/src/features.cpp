// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "treeskel/cloud_io.hpp"
#include "treeskel/error.hpp"
#include "treeskel/parallel.hpp"

namespace treeskel {
namespace {

// Running first and second moments, centered on a reference point so the
// raw-moment covariance stays well conditioned.
struct Moments {
  std::size_t n = 0;
  Vec3 sum = Vec3::Zero();
  Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();

  void add(const Vec3& d) {
    ++n;
    sum += d;
    outer += d * d.transpose();
  }
  void merge(const Moments& o) {
    n += o.n;
    sum += o.sum;
    outer += o.outer;
  }
};

NeighborhoodEigen decompose(const Moments& m) {
  NeighborhoodEigen out;
  out.count = m.n;
  if (m.n < 3) return out;
  const double inv = 1.0 / static_cast<double>(m.n);
  const Vec3 mean = m.sum * inv;
  const Eigen::Matrix3d cov = m.outer * inv - mean * mean.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  // Eigen sorts ascending.
  for (int i = 0; i < 3; ++i) {
    out.values[i] = std::max(0.0, solver.eigenvalues()[2 - i]);
    out.vectors[i] = solver.eigenvectors().col(2 - i);
  }
  if (out.values[0] <= 0.0) return NeighborhoodEigen{.count = m.n};
  return out;
}

double normal_change_rate(const Vec3& normal, bool degenerate,
                          std::span<const Neighbor> neighbors, double r2,
                          const std::vector<Vec3>& normals, const std::vector<char>& valid) {
  if (degenerate) return 0.0;
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& n : neighbors) {
    if (n.dist2 > r2 || !valid[n.index]) continue;
    sum += 1.0 - std::abs(normal.dot(normals[n.index]));
    ++used;
  }
  return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

// Shared by the pointwise and batch paths so both produce identical rows.
// `normals`/`valid` are indexed like `index` and describe 8 cm neighborhoods.
FeatureVector feature_row(const SpatialIndex& index, const Vec3& p, const CylinderModel& trunk,
                          const std::vector<Vec3>& normals, const std::vector<char>& valid,
                          std::vector<Neighbor>& scratch) {
  index.radius(p, kRadius15cm, scratch);
  constexpr std::array<double, 4> radii = {kRadius2cm, kRadius4cm, kRadius8cm, kRadius15cm};
  std::array<double, 4> r2{};
  for (int i = 0; i < 4; ++i) r2[i] = radii[i] * radii[i];

  std::array<Moments, 4> shell;  // points with dist in (r_{k-1}, r_k]
  for (const auto& n : scratch) {
    int k = 0;
    while (n.dist2 > r2[k]) ++k;
    shell[k].add(index.position(n.index) - p);
  }
  std::array<NeighborhoodEigen, 4> e;
  Moments acc;
  for (int k = 0; k < 4; ++k) {
    acc.merge(shell[k]);
    e[k] = decompose(acc);
  }

  FeatureVector f{};
  for (int k = 0; k < 4; ++k) f[k] = static_cast<double>(e[k].count);
  f[4] = pca1(e[0]);
  f[5] = pca1(e[1]);
  f[6] = pca1(e[2]);
  f[7] = pca2(e[0]);
  f[8] = pca2(e[2]);
  f[9] = omnivariance(e[0]);
  f[10] = omnivariance(e[1]);
  f[11] = omnivariance(e[2]);
  f[12] = omnivariance(e[3]);
  f[13] = linearity(e[0]);
  f[14] = linearity(e[1]);
  f[15] = verticality(e[3]);
  f[16] = planarity(e[2]);
  f[17] = normal_change_rate(e[2].normal(), e[2].degenerate(), scratch, r2[2], normals, valid);
  f[18] = surface_variation(e[2]);
  f[19] = point_cylinder_distance(p, trunk);
  return f;
}

void normal_at(const SpatialIndex& index, std::size_t i, std::vector<Vec3>& normals,
               std::vector<char>& valid) {
  const auto e = eigen_features(index, index.position(i), kRadius8cm);
  normals[i] = e.normal();
  valid[i] = e.degenerate() ? 0 : 1;
}

}  // namespace

Vec3 NeighborhoodEigen::normal() const {
  Vec3 n = vectors[2];
  if (n.z() < 0.0) n = -n;
  return n;
}

NeighborhoodEigen eigen_of(std::span<const Vec3> points) {
  Moments m;
  if (!points.empty()) {
    const Vec3 ref = points.front();
    for (const auto& p : points) m.add(p - ref);
  }
  return decompose(m);
}

NeighborhoodEigen eigen_features(const SpatialIndex& index, const Vec3& p, double r) {
  if (!(r > 0.0)) throw ParameterError("neighborhood radius must be positive");
  std::vector<Neighbor> found;
  index.radius(p, r, found);
  Moments m;
  for (const auto& n : found) m.add(index.position(n.index) - p);
  return decompose(m);
}

double pca1(const NeighborhoodEigen& e) {
  const double sum = e.values[0] + e.values[1] + e.values[2];
  return sum > 0.0 ? e.values[0] / sum : 0.0;
}

double pca2(const NeighborhoodEigen& e) {
  const double sum = e.values[0] + e.values[1] + e.values[2];
  return sum > 0.0 ? e.values[1] / sum : 0.0;
}

double omnivariance(const NeighborhoodEigen& e) {
  return std::cbrt(e.values[0] * e.values[1] * e.values[2]);
}

double linearity(const NeighborhoodEigen& e) {
  return e.values[0] > 0.0 ? (e.values[0] - e.values[1]) / e.values[0] : 0.0;
}

double planarity(const NeighborhoodEigen& e) {
  return e.values[0] > 0.0 ? (e.values[1] - e.values[2]) / e.values[0] : 0.0;
}

double surface_variation(const NeighborhoodEigen& e) {
  const double sum = e.values[0] + e.values[1] + e.values[2];
  return sum > 0.0 ? e.values[2] / sum : 0.0;
}

double verticality(const NeighborhoodEigen& e) {
  if (e.degenerate()) return 0.0;
  return std::clamp(1.0 - std::abs(e.vectors[2].z()), 0.0, 1.0);
}

FeatureVector compute_feature_vector(const SpatialIndex& index, const Vec3& p,
                                     const CylinderModel& trunk) {
  std::vector<Vec3> normals(index.size(), Vec3::UnitZ());
  std::vector<char> valid(index.size(), 0);
  std::vector<Neighbor> scratch;
  index.radius(p, kRadius8cm, scratch);
  const auto near = scratch;
  for (const auto& n : near) normal_at(index, n.index, normals, valid);
  return feature_row(index, p, trunk, normals, valid, scratch);
}

FeatureMatrix compute_all_features(const PointCloud& cloud, const SpatialIndex& index,
                                   const CylinderModel& trunk) {
  if (cloud.empty()) throw DataError("feature computation needs a non-empty cloud");
  std::vector<Vec3> normals(index.size(), Vec3::UnitZ());
  std::vector<char> valid(index.size(), 0);
  parallel_for(index.size(), [&](std::size_t i) { normal_at(index, i, normals, valid); });

  FeatureMatrix out(static_cast<Eigen::Index>(cloud.size()), kFeatureCount);
  parallel_for(cloud.size(), [&](std::size_t i) {
    thread_local std::vector<Neighbor> scratch;
    const FeatureVector row = feature_row(index, cloud[i].position, trunk, normals, valid, scratch);
    for (std::size_t k = 0; k < kFeatureCount; ++k) out(static_cast<Eigen::Index>(i), k) = row[k];
  });
  return out;
}

FeatureMatrix compute_all_features(const PointCloud& cloud, const CylinderModel& trunk) {
  const SpatialIndex index(cloud);
  return compute_all_features(cloud, index, trunk);
}

std::vector<double> verticality_at(const SpatialIndex& index, std::span<const Vec3> points,
                                   double radius) {
  std::vector<double> out(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    out[i] = verticality(eigen_features(index, points[i], radius));
  });
  return out;
}

std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= kFeatureCount; ++k) names.push_back("f" + std::to_string(k));
  return names;
}

void save_feature_csv(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  const auto names = feature_names();
  for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
  out << '\n';
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index k = 0; k < features.cols(); ++k) {
      out << (k ? "," : "") << format_double(features(i, k));
    }
    out << '\n';
  }
}

}  // namespace treeskel
