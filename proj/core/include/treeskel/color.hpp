// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace treeskel {

struct Lab {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// sRGB (8 bit per channel, piecewise gamma) to CIELAB under D65.
/// Throws ParameterError for channels outside [0, 255].
Lab rgb_to_cielab(int r, int g, int b);

}  // namespace treeskel
