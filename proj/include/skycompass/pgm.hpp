#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace skycompass::pgm {

/// Binary (P5) graymap. Samples wider than 8 bits are stored big-endian.
struct Graymap {
  int width = 0;
  int height = 0;
  int maxval = 65535;
  std::vector<std::uint16_t> samples;
};

void write(const std::filesystem::path& path, const Graymap& image);

/// Throws std::runtime_error on I/O failure or a malformed header/payload.
Graymap read(const std::filesystem::path& path);

}  // namespace skycompass::pgm
