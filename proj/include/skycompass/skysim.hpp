#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <skycompass/mosaic.hpp>

/// Single-scattering Rayleigh sky and pixel-polarizer camera simulator.
///
/// Sky frame: x = East, y = North, z = Up. Azimuths are degrees clockwise from
/// North. The camera points at the zenith through an equidistant fisheye; the
/// image is map-oriented, with the rig heading at the top of the frame. Image
/// plane angles (AOP, analyzer angles) are measured counter-clockwise from the
/// column axis with rows pointing down.
namespace skycompass::skysim {

using Vec3 = Eigen::Vector3d;

struct SunPosition {
  double azimuth_deg = 0.0;
  double altitude_deg = 0.0;

  /// Normalizes azimuth into [0, 360); throws std::invalid_argument for altitude outside [-90, 90].
  static SunPosition make(double azimuth_deg, double altitude_deg);

  Vec3 direction() const;
  bool operator==(const SunPosition&) const = default;
};

struct CameraRig {
  double heading_deg = 0.0;
  int width = 64;
  int height = 64;
  double fov_deg = 90.0;  // zenith angle reached at the disc edge
  double dop_max = 0.8;

  void validate() const;
  double center_row() const { return 0.5 * (height - 1); }
  double center_col() const { return 0.5 * (width - 1); }
  double disc_radius() const { return 0.5 * std::min(width, height); }
};

struct ViewSample {
  Vec3 direction{0.0, 0.0, 1.0};
  double zenith_deg = 0.0;
  double image_angle_deg = 0.0;  // clockwise from image top
  bool inside_disc = true;
};

/// Viewing direction for a point in continuous pixel coordinates; pixel (r, c)
/// has its center at (r, c). Throws std::out_of_range outside the image bounds.
ViewSample view_direction(double row, double col, const CameraRig& rig);

double scattering_angle(const Vec3& view, const SunPosition& sun);

double rayleigh_dop(double scattering_deg, double dop_max);

struct AopSample {
  double aop_deg = 0.0;
  bool degenerate = false;
};

/// E-vector angle in the image frame. The E-vector is perpendicular to the
/// plane containing the view and sun directions; degenerate when they are
/// (anti)parallel.
AopSample rayleigh_aop(const ViewSample& view, const SunPosition& sun, const CameraRig& rig);

struct SkyStokesField {
  int width = 0;
  int height = 0;
  Map s0;
  Map dop;
  Map aop;
  Mask inside;
  Mask degenerate;
};

SkyStokesField synthesize_field(const CameraRig& rig, const SunPosition& sun);

/// Ideal analyzer response I(theta) = (S0/2)(1 + DOP cos 2(theta - AOP)).
double malus_response(double s0, double dop, double aop_deg, double analyzer_deg);

/// Noise-free, unquantized sensor values in [0, 1] of full scale.
Map analyzer_image(const SkyStokesField& field, const PolarizerPattern& pattern);

MosaicImage synthesize_mosaic(const SkyStokesField& field, const PolarizerPattern& pattern,
                              double noise_sigma, int bit_depth, std::mt19937_64& rng);

}  // namespace skycompass::skysim
