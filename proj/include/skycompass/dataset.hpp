#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <skycompass/mosaic.hpp>
#include <skycompass/skysim.hpp>

namespace skycompass::skysim {

/// Everything needed to regenerate one sample bit-for-bit.
struct SampleMeta {
  std::size_t index = 0;
  double heading_deg = 0.0;
  SunPosition sun;
  double dop_max = 0.8;
  double noise_sigma = 0.005;
  std::uint64_t rng_seed = 0;
  int bit_depth = 12;
  PolarizerPattern pattern;
  int width = 64;
  int height = 64;
  double fov_deg = 90.0;

  CameraRig rig() const { return {heading_deg, width, height, fov_deg, dop_max}; }
  bool operator==(const SampleMeta&) const = default;
};

struct Sample {
  SampleMeta meta;
  MosaicImage mosaic;
};

struct GenerationConfig {
  std::size_t count = 0;
  std::uint64_t seed = 1;
  int width = 64;
  int height = 64;
  double fov_deg = 90.0;
  double dop_max = 0.8;
  double noise_sigma = 0.005;
  int bit_depth = 12;
  PolarizerPattern pattern;
  double heading_step_deg = 1.0;  // 0 draws continuous headings
  double sun_azimuth_min_deg = 0.0;
  double sun_azimuth_max_deg = 0.0;
  double sun_altitude_min_deg = 0.0;
  double sun_altitude_max_deg = 60.0;
  unsigned threads = 1;

  void validate() const;
};

/// Draws the metadata of sample `index`; depends only on (config, index).
SampleMeta draw_sample_meta(const GenerationConfig& config, std::size_t index);

/// Renders the mosaic described by `meta`, drawing sensor noise from meta.rng_seed.
MosaicImage render_sample(const SampleMeta& meta);

std::string sample_basename(std::size_t index);

struct DatasetManifest {
  std::filesystem::path directory;
  std::vector<std::string> basenames;
};

inline constexpr const char* kManifestName = "manifest.txt";

/// Writes `config.count` samples (PGM + JSON sidecar) and the manifest into `out_dir`.
/// On any I/O failure every file written by this call is removed and the error rethrown.
DatasetManifest generate_dataset(const GenerationConfig& config, const std::filesystem::path& out_dir);

void write_sample(const std::filesystem::path& dir, const Sample& sample);
Sample read_sample(const std::filesystem::path& dir, const std::string& basename);

/// Sidecar (JSON) text for a sample's metadata.
std::string meta_to_json(const SampleMeta& meta);
SampleMeta meta_from_json(const std::string& text);

DatasetManifest read_manifest(const std::filesystem::path& dir);
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

/// Wraps a mosaic as a graymap and back; the pattern is carried by the sidecar.
MosaicImage mosaic_from_pgm(const std::filesystem::path& path, int bit_depth, const PolarizerPattern& pattern);

}  // namespace skycompass::skysim
