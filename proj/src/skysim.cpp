#include <skycompass/skysim.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <skycompass/angles.hpp>

namespace skycompass {

void PolarizerPattern::validate() const {
  std::array<int, 4> sorted = angles_deg;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != std::array<int, 4>{0, 45, 90, 135})
    throw std::invalid_argument("polarizer pattern must be a permutation of {0, 45, 90, 135}");
}

std::array<int, 2> PolarizerPattern::offset_of(int angle_deg) const {
  for (int i = 0; i < 4; ++i)
    if (angles_deg[static_cast<std::size_t>(i)] == angle_deg) return {i / 2, i % 2};
  throw std::invalid_argument("analyzer angle " + std::to_string(angle_deg) + " not in pattern");
}

MosaicImage::MosaicImage(int w, int h, int depth, PolarizerPattern p)
    : width(w), height(h), bit_depth(depth), pattern(p) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("mosaic dimensions must be positive");
  if (depth < 1 || depth > 16) throw std::invalid_argument("bit depth must be in [1, 16]");
  pattern.validate();
  pixels.assign(static_cast<std::size_t>(w) * h, 0);
}

namespace skysim {

SunPosition SunPosition::make(double azimuth_deg, double altitude_deg) {
  if (!std::isfinite(azimuth_deg) || !std::isfinite(altitude_deg))
    throw std::invalid_argument("sun position must be finite");
  if (altitude_deg < -90.0 || altitude_deg > 90.0)
    throw std::invalid_argument("sun altitude outside [-90, 90]: " + std::to_string(altitude_deg));
  return {wrap_360(azimuth_deg), altitude_deg};
}

Vec3 SunPosition::direction() const {
  const double az = deg_to_rad(azimuth_deg);
  const double alt = deg_to_rad(altitude_deg);
  return {std::cos(alt) * std::sin(az), std::cos(alt) * std::cos(az), std::sin(alt)};
}

void CameraRig::validate() const {
  if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0)
    throw std::invalid_argument("rig width and height must be positive and even");
  if (!(heading_deg >= 0.0 && heading_deg < 360.0))
    throw std::invalid_argument("rig heading must lie in [0, 360)");
  if (!(fov_deg > 0.0 && fov_deg <= 180.0)) throw std::invalid_argument("rig fov must lie in (0, 180]");
  if (!(dop_max > 0.0 && dop_max <= 1.0)) throw std::invalid_argument("dop_max must lie in (0, 1]");
}

ViewSample view_direction(double row, double col, const CameraRig& rig) {
  if (row < -0.5 || col < -0.5 || row > rig.height - 0.5 || col > rig.width - 0.5)
    throw std::out_of_range("pixel outside image bounds");

  const double x = col - rig.center_col();
  const double y = rig.center_row() - row;
  const double rho = std::hypot(x, y) / rig.disc_radius();

  ViewSample v;
  v.inside_disc = rho <= 1.0;
  v.zenith_deg = rig.fov_deg * rho;
  v.image_angle_deg = (x == 0.0 && y == 0.0) ? 0.0 : rad_to_deg(std::atan2(x, y));

  const double zen = deg_to_rad(v.zenith_deg);
  const double az = deg_to_rad(rig.heading_deg + v.image_angle_deg);
  v.direction = {std::sin(zen) * std::sin(az), std::sin(zen) * std::cos(az), std::cos(zen)};
  return v;
}

double scattering_angle(const Vec3& view, const SunPosition& sun) {
  const double c = std::clamp(view.dot(sun.direction()), -1.0, 1.0);
  return rad_to_deg(std::acos(c));
}

double rayleigh_dop(double scattering_deg, double dop_max) {
  const double c = std::cos(deg_to_rad(scattering_deg));
  const double s = std::sin(deg_to_rad(scattering_deg));
  return dop_max * s * s / (1.0 + c * c);
}

AopSample rayleigh_aop(const ViewSample& view, const SunPosition& sun, const CameraRig& rig) {
  const Vec3 e = view.direction.cross(sun.direction());
  if (e.norm() < 1e-12) return {0.0, true};

  // Local sky basis at the view direction: increasing zenith angle, increasing azimuth.
  const double zen = deg_to_rad(view.zenith_deg);
  const double az = deg_to_rad(rig.heading_deg + view.image_angle_deg);
  const Vec3 e_zenith{std::cos(zen) * std::sin(az), std::cos(zen) * std::cos(az), -std::sin(zen)};
  const Vec3 e_azimuth{std::cos(az), -std::sin(az), 0.0};
  const double radial = e.dot(e_zenith);
  const double tangential = e.dot(e_azimuth);

  // Same components along the image radial and clockwise-tangential axes (x right, y up).
  const double alpha = deg_to_rad(view.image_angle_deg);
  const double ix = radial * std::sin(alpha) + tangential * std::cos(alpha);
  const double iy = radial * std::cos(alpha) - tangential * std::sin(alpha);
  return {wrap_axial(rad_to_deg(std::atan2(iy, ix))), false};
}

SkyStokesField synthesize_field(const CameraRig& rig, const SunPosition& sun) {
  rig.validate();
  SkyStokesField f;
  f.width = rig.width;
  f.height = rig.height;
  f.s0 = Map::Zero(rig.height, rig.width);
  f.dop = Map::Zero(rig.height, rig.width);
  f.aop = Map::Zero(rig.height, rig.width);
  f.inside = Mask::Constant(rig.height, rig.width, false);
  f.degenerate = Mask::Constant(rig.height, rig.width, false);

  for (int r = 0; r < rig.height; ++r) {
    for (int c = 0; c < rig.width; ++c) {
      const ViewSample v = view_direction(r, c, rig);
      if (!v.inside_disc) continue;
      const double gamma = scattering_angle(v.direction, sun);
      const double cg = std::cos(deg_to_rad(gamma));
      const AopSample a = rayleigh_aop(v, sun, rig);
      f.inside(r, c) = true;
      f.s0(r, c) = 0.5 * (1.0 + cg * cg);
      f.dop(r, c) = a.degenerate ? 0.0 : rayleigh_dop(gamma, rig.dop_max);
      f.aop(r, c) = a.aop_deg;
      f.degenerate(r, c) = a.degenerate;
    }
  }
  return f;
}

double malus_response(double s0, double dop, double aop_deg, double analyzer_deg) {
  return 0.5 * s0 * (1.0 + dop * std::cos(2.0 * deg_to_rad(analyzer_deg - aop_deg)));
}

Map analyzer_image(const SkyStokesField& field, const PolarizerPattern& pattern) {
  pattern.validate();
  Map out(field.height, field.width);
  for (int r = 0; r < field.height; ++r)
    for (int c = 0; c < field.width; ++c)
      out(r, c) = malus_response(field.s0(r, c), field.dop(r, c), field.aop(r, c),
                                 pattern.angle_at(r % 2, c % 2));
  return out;
}

MosaicImage synthesize_mosaic(const SkyStokesField& field, const PolarizerPattern& pattern,
                              double noise_sigma, int bit_depth, std::mt19937_64& rng) {
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  MosaicImage img(field.width, field.height, bit_depth, pattern);
  const Map ideal = analyzer_image(field, pattern);
  const double full = img.full_scale();
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);

  for (int r = 0; r < field.height; ++r) {
    for (int c = 0; c < field.width; ++c) {
      double v = ideal(r, c);
      if (noise_sigma > 0.0) v += noise(rng);
      v = std::clamp(v, 0.0, 1.0);
      img.at(r, c) = static_cast<std::uint16_t>(std::lround(v * full));
    }
  }
  return img;
}

}  // namespace skysim
}  // namespace skycompass
