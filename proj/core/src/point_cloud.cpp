// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/point_cloud.hpp"

#include <cmath>
#include <unordered_set>

#include "treeskel/error.hpp"

namespace treeskel {

PointCloud::PointCloud(std::vector<Point> points) : points_(std::move(points)) {
  std::unordered_set<std::int64_t> ids;
  ids.reserve(points_.size());
  for (const auto& p : points_) {
    if (!p.position.allFinite()) {
      throw DataError("point " + std::to_string(p.source_id) + " has non-finite coordinates");
    }
    if (p.normal && std::abs(p.normal->norm() - 1.0) > 1e-9) {
      throw DataError("point " + std::to_string(p.source_id) + " has a non-unit normal");
    }
    if (!ids.insert(p.source_id).second) {
      throw DataError("duplicate source_id " + std::to_string(p.source_id));
    }
  }
}

std::vector<Vec3> PointCloud::positions() const {
  std::vector<Vec3> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.position);
  return out;
}

bool PointCloud::has_color() const {
  if (points_.empty()) return false;
  for (const auto& p : points_) {
    if (!p.color) return false;
  }
  return true;
}

bool PointCloud::has_normals() const {
  if (points_.empty()) return false;
  for (const auto& p : points_) {
    if (!p.normal) return false;
  }
  return true;
}

void PointCloud::set_field(const std::string& name, ScalarField values) {
  const std::size_t n = std::visit([](const auto& v) { return v.size(); }, values);
  if (n != points_.size()) {
    throw DataError("scalar field '" + name + "' has " + std::to_string(n) + " values for " +
                    std::to_string(points_.size()) + " points");
  }
  fields_[name] = std::move(values);
}

bool PointCloud::has_field(const std::string& name) const { return fields_.contains(name); }

const ScalarField& PointCloud::field(const std::string& name) const {
  const auto it = fields_.find(name);
  if (it == fields_.end()) throw DataError("missing scalar field '" + name + "'");
  return it->second;
}

const IntField& PointCloud::int_field(const std::string& name) const {
  const auto* values = std::get_if<IntField>(&field(name));
  if (values == nullptr) throw DataError("scalar field '" + name + "' is not an integer field");
  return *values;
}

RealField PointCloud::real_field(const std::string& name) const {
  return std::visit(
      [](const auto& v) {
        RealField out(v.begin(), v.end());
        return out;
      },
      field(name));
}

PointCloud PointCloud::subset(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.points_.reserve(indices.size());
  for (std::size_t i : indices) out.points_.push_back(points_.at(i));
  for (const auto& [name, values] : fields_) {
    out.fields_[name] = std::visit(
        [&](const auto& v) -> ScalarField {
          std::decay_t<decltype(v)> picked;
          picked.reserve(indices.size());
          for (std::size_t i : indices) picked.push_back(v[i]);
          return picked;
        },
        values);
  }
  out.metadata_ = metadata_;
  return out;
}

}  // namespace treeskel
