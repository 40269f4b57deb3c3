#pragma once

#include <vector>

#include <skycompass/mosaic.hpp>

/// Fixed (non-trainable) front layers of the orientation network: strided
/// demosaicking, mean pooling, Stokes maps, and DOP/AOP extraction.
namespace skycompass::polarimg {

/// Per-analyzer intensities normalized by the sensor full scale.
struct IntensityChannels {
  Map i0, i45, i90, i135;

  int rows() const { return static_cast<int>(i0.rows()); }
  int cols() const { return static_cast<int>(i0.cols()); }
};

/// Linear Stokes maps; S3 is not represented.
struct StokesMaps {
  Map s0, s1, s2;
};

struct PolarizationMaps {
  Map dop;          // clamped to [0, 1]
  Map aop;          // degrees, (-90, 90]
  Mask degenerate;  // dark pixel or s1 = s2 = 0
};

inline constexpr double kDarkEpsilon = 1e-9;

/// One-hot 2x2 kernels with stride 2; throws std::invalid_argument on odd dimensions.
IntensityChannels demosaic(const MosaicImage& mosaic);

/// Block mean; trailing rows/cols that do not fill a block are dropped.
Map mean_pool(const Map& map, int pool_size);
IntensityChannels mean_pool(const IntensityChannels& channels, int pool_size);

StokesMaps stokes(const IntensityChannels& channels);

double dop_value(double s0, double s1, double s2);
double aop_value(double s1, double s2);

Map dop(const StokesMaps& stokes);
Map aop(const StokesMaps& stokes);
PolarizationMaps polarization(const StokesMaps& stokes);

/// Stacked (s0, dop, aop) maps, each normalized to [0, 1]; map-major, row-major within a map.
struct FeatureTensor {
  int grid_rows = 0;
  int grid_cols = 0;
  std::vector<double> values;

  int map_size() const { return grid_rows * grid_cols; }
  double at(int map, int row, int col) const {
    return values[static_cast<std::size_t>(map * map_size() + row * grid_cols + col)];
  }
};

enum FeatureMap : int { kS0 = 0, kDop = 1, kAop = 2 };
inline constexpr int kFeatureMaps = 3;
inline constexpr double kS0Max = 2.0;

FeatureTensor build_feature_tensor(const StokesMaps& stokes, const PolarizationMaps& polarization,
                                   int pool_size);

/// Settings of the fixed front end.
struct PipelineConfig {
  int channel_pool = 4;  // pooling applied to the intensity channels
  int feature_pool = 1;  // pooling applied when stacking the feature tensor

  void validate() const;
};

/// Input layer through the feature tensor for one raw frame.
FeatureTensor extract_features(const MosaicImage& mosaic, const PipelineConfig& config);

}  // namespace skycompass::polarimg
