// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/color.hpp"

#include <cmath>

#include "treeskel/error.hpp"

namespace treeskel {
namespace {

double linearize(int channel) {
  const double c = channel / 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

Lab rgb_to_cielab(int r, int g, int b) {
  for (int c : {r, g, b}) {
    if (c < 0 || c > 255) throw ParameterError("color channel out of range [0,255]");
  }
  const double R = linearize(r);
  const double G = linearize(g);
  const double B = linearize(b);

  // D65 reference white; rows of the sRGB -> XYZ matrix sum to it.
  constexpr double Xn = 0.95047;
  constexpr double Yn = 1.00000;
  constexpr double Zn = 1.08883;
  const double X = 0.4124564 * R + 0.3575761 * G + 0.1804375 * B;
  const double Y = 0.2126729 * R + 0.7151522 * G + 0.0721750 * B;
  const double Z = 0.0193339 * R + 0.1191920 * G + 0.9503041 * B;

  const double fx = lab_f(X / Xn);
  const double fy = lab_f(Y / Yn);
  const double fz = lab_f(Z / Zn);
  return Lab{116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

}  // namespace treeskel
