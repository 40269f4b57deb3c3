#include <skycompass/polarimg.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <skycompass/angles.hpp>

namespace skycompass::polarimg {

IntensityChannels demosaic(const MosaicImage& mosaic) {
  if (mosaic.width <= 0 || mosaic.height <= 0 || mosaic.width % 2 != 0 || mosaic.height % 2 != 0)
    throw std::invalid_argument("demosaic: mosaic dimensions must be positive and even");
  mosaic.pattern.validate();

  const int rows = mosaic.height / 2;
  const int cols = mosaic.width / 2;
  const double scale = 1.0 / mosaic.full_scale();

  auto channel = [&](int angle) {
    const auto [dr, dc] = mosaic.pattern.offset_of(angle);
    Map out(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) out(r, c) = mosaic.at(2 * r + dr, 2 * c + dc) * scale;
    return out;
  };
  return {channel(0), channel(45), channel(90), channel(135)};
}

Map mean_pool(const Map& map, int pool_size) {
  if (pool_size <= 0) throw std::invalid_argument("mean_pool: pool size must be positive");
  if (pool_size == 1) return map;
  const Eigen::Index rows = map.rows() / pool_size;
  const Eigen::Index cols = map.cols() / pool_size;
  Map out(rows, cols);
  const double inv = 1.0 / (pool_size * pool_size);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      out(r, c) = map.block(r * pool_size, c * pool_size, pool_size, pool_size).sum() * inv;
  return out;
}

IntensityChannels mean_pool(const IntensityChannels& ch, int pool_size) {
  return {mean_pool(ch.i0, pool_size), mean_pool(ch.i45, pool_size), mean_pool(ch.i90, pool_size),
          mean_pool(ch.i135, pool_size)};
}

StokesMaps stokes(const IntensityChannels& ch) {
  if (ch.i0.size() == 0) throw std::invalid_argument("stokes: empty channels");
  const auto same = [&](const Map& m) { return m.rows() == ch.i0.rows() && m.cols() == ch.i0.cols(); };
  if (!same(ch.i45) || !same(ch.i90) || !same(ch.i135))
    throw std::invalid_argument("stokes: channel dimensions differ");
  return {0.5 * (ch.i0 + ch.i45 + ch.i90 + ch.i135), ch.i0 - ch.i90, ch.i45 - ch.i135};
}

double dop_value(double s0, double s1, double s2) {
  if (s0 < kDarkEpsilon) return 0.0;
  return std::clamp(std::hypot(s1, s2) / s0, 0.0, 1.0);
}

double aop_value(double s1, double s2) {
  if (s1 == 0.0 && s2 == 0.0) return 0.0;
  // Halved two-argument arctangent lands in [-90, 90]; -90 folds onto +90.
  return wrap_axial(0.5 * rad_to_deg(std::atan2(s2, s1)));
}

Map dop(const StokesMaps& s) {
  Map out(s.s0.rows(), s.s0.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = dop_value(s.s0(i), s.s1(i), s.s2(i));
  return out;
}

Map aop(const StokesMaps& s) {
  Map out(s.s0.rows(), s.s0.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) = s.s0(i) < kDarkEpsilon ? 0.0 : aop_value(s.s1(i), s.s2(i));
  return out;
}

PolarizationMaps polarization(const StokesMaps& s) {
  PolarizationMaps p{dop(s), aop(s), Mask(s.s0.rows(), s.s0.cols())};
  for (Eigen::Index i = 0; i < s.s0.size(); ++i)
    p.degenerate(i) = s.s0(i) < kDarkEpsilon || (s.s1(i) == 0.0 && s.s2(i) == 0.0);
  return p;
}

FeatureTensor build_feature_tensor(const StokesMaps& s, const PolarizationMaps& p, int pool_size) {
  const Map maps[kFeatureMaps] = {
      mean_pool(s.s0 / kS0Max, pool_size),
      mean_pool(p.dop, pool_size),
      mean_pool((p.aop + 90.0) / 180.0, pool_size),
  };
  FeatureTensor t;
  t.grid_rows = static_cast<int>(maps[0].rows());
  t.grid_cols = static_cast<int>(maps[0].cols());
  t.values.reserve(static_cast<std::size_t>(kFeatureMaps * t.map_size()));
  for (const Map& m : maps) {
    if (m.rows() != t.grid_rows || m.cols() != t.grid_cols)
      throw std::invalid_argument("build_feature_tensor: inconsistent map dimensions");
    for (int r = 0; r < t.grid_rows; ++r)
      for (int c = 0; c < t.grid_cols; ++c) t.values.push_back(std::clamp(m(r, c), 0.0, 1.0));
  }
  return t;
}

void PipelineConfig::validate() const {
  if (channel_pool <= 0 || feature_pool <= 0) throw std::invalid_argument("pool sizes must be positive");
}

FeatureTensor extract_features(const MosaicImage& mosaic, const PipelineConfig& config) {
  config.validate();
  const StokesMaps s = stokes(mean_pool(demosaic(mosaic), config.channel_pool));
  return build_feature_tensor(s, polarization(s), config.feature_pool);
}

}  // namespace skycompass::polarimg
