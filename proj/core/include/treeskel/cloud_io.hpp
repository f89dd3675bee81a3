// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "treeskel/point_cloud.hpp"

namespace treeskel {

enum class CloudFormat { ply_ascii, xyz_csv };

/// Picks the format from the file extension (.ply or .csv/.xyz/.txt).
CloudFormat format_from_path(const std::filesystem::path& path);

/// Loads a cloud. Source ids are assigned 0..n-1 in file order. PLY
/// properties other than x/y/z, red/green/blue and nx/ny/nz become scalar
/// fields; integer-typed properties become integer fields. PLY comments of
/// the form "comment key value" populate the metadata map.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);

/// Writes coordinates in shortest round-trip form; color properties are
/// emitted only when every point has a color.
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace treeskel
