// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace treeskel {

using Vec3 = Eigen::Vector3d;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// A single sample. Coordinates are meters; `source_id` survives every
/// filtering stage so results can be traced back to the input file.
struct Point {
  Vec3 position = Vec3::Zero();
  std::optional<Rgb> color;
  std::optional<Vec3> normal;
  std::int64_t source_id = 0;
};

using RealField = std::vector<double>;
using IntField = std::vector<std::int64_t>;
using ScalarField = std::variant<RealField, IntField>;

/// Ordered point set with named per-point scalar fields.
///
/// Invariants (checked on construction and on add_field): coordinates are
/// finite, normals have unit length, source ids are unique and every scalar
/// field holds exactly one value per point.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Point> points);

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  const Point& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Point>& points() const noexcept { return points_; }
  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }

  std::vector<Vec3> positions() const;

  /// True when the cloud is non-empty and every point carries a color.
  bool has_color() const;
  bool has_normals() const;

  void set_field(const std::string& name, ScalarField values);
  bool has_field(const std::string& name) const;
  const ScalarField& field(const std::string& name) const;
  const IntField& int_field(const std::string& name) const;
  /// Real view of any field; integer fields are converted.
  RealField real_field(const std::string& name) const;
  const std::map<std::string, ScalarField>& fields() const noexcept { return fields_; }

  /// Free-form key/value pairs carried through I/O (PLY comments).
  std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

  /// Points at `indices` (in the given order) with all scalar fields and
  /// metadata carried along.
  PointCloud subset(std::span<const std::size_t> indices) const;

  /// Applies p -> transform(p) to positions and the linear part to normals.
  template <typename Fn>
  PointCloud transformed(Fn&& position_map, const Eigen::Matrix3d& linear) const {
    PointCloud out = *this;
    for (auto& p : out.points_) {
      p.position = position_map(p.position);
      if (p.normal) p.normal = (linear * *p.normal).normalized();
    }
    return out;
  }

 private:
  std::vector<Point> points_;
  std::map<std::string, ScalarField> fields_;
  std::map<std::string, std::string> metadata_;
};

}  // namespace treeskel
