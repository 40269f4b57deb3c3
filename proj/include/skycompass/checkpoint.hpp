#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <skycompass/network.hpp>

namespace skycompass::network {

/// Checkpoint layout (little-endian):
///   char[8]  magic "SKYCKPT\0"
///   u32      format version
///   u32 x 7  grid_rows, grid_cols, branch_hidden1, branch_hidden2, fusion_hidden, output_size,
///            output_activation
///   u32, f64, f64   encoding scheme, j, m
///   u32 x 2  channel_pool, feature_pool
///   u64      parameter count
///   f64[]    per layer in LayerIndex order: weight (row-major, out x in), then bias
///   u64      FNV-1a hash of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrc { Io, Corrupt, VersionMismatch, ShapeMismatch };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  CheckpointErrc code() const { return code_; }

 private:
  CheckpointErrc code_;
};

void save_checkpoint(const Model& model, const std::filesystem::path& path);

Model load_checkpoint(const std::filesystem::path& path);

/// As load_checkpoint, but throws ShapeMismatch unless the stored network and
/// encoding equal the expected ones.
Model load_checkpoint(const std::filesystem::path& path, const NetworkConfig& expected_network,
                      const encoding::EncodingSpec& expected_spec);

}  // namespace skycompass::network
