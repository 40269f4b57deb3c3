#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace skycompass {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Maps any angle into [0, 360).
inline double wrap_360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r >= 360.0) r -= 360.0;  // fmod of tiny negatives can round up to 360
  return r;
}

/// Maps an axial (mod 180) angle into (-90, 90].
inline double wrap_axial(double deg) {
  double r = std::fmod(deg, 180.0);
  if (r <= -90.0) r += 180.0;
  if (r > 90.0) r -= 180.0;
  return r;
}

/// Smallest separation between two axial angles, in [0, 90].
inline double axial_distance(double a_deg, double b_deg) {
  double d = std::fabs(std::fmod(a_deg - b_deg, 180.0));
  return std::min(d, 180.0 - d);
}

}  // namespace skycompass
