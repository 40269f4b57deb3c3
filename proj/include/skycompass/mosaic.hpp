#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace skycompass {

/// Dense real-valued image plane, indexed (row, col).
using Map = Eigen::ArrayXXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Analyzer angle assignment for one 2x2 super-pixel.
///
/// Cells are stored in row-major offset order: (0,0), (0,1), (1,0), (1,1).
struct PolarizerPattern {
  std::array<int, 4> angles_deg{90, 45, 135, 0};

  /// Throws std::invalid_argument unless the cells are a permutation of {0, 45, 90, 135}.
  void validate() const;

  int angle_at(int dr, int dc) const { return angles_deg[static_cast<std::size_t>(2 * dr + dc)]; }

  /// Offset (dr, dc) of the cell carrying `angle_deg`.
  std::array<int, 2> offset_of(int angle_deg) const;

  bool operator==(const PolarizerPattern&) const = default;
};

/// Raw division-of-focal-plane sensor frame.
struct MosaicImage {
  int width = 0;
  int height = 0;
  int bit_depth = 12;
  PolarizerPattern pattern;
  std::vector<std::uint16_t> pixels;  // row-major, height * width

  MosaicImage() = default;
  MosaicImage(int width, int height, int bit_depth, PolarizerPattern pattern);

  std::uint16_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::uint16_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }

  double full_scale() const { return static_cast<double>((1u << bit_depth) - 1u); }

  bool operator==(const MosaicImage&) const = default;
};

}  // namespace skycompass
