#include <skycompass/checkpoint.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace skycompass::network {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'Y', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }

  std::vector<unsigned char> bytes;

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& b, std::size_t end) : bytes_(b), end_(end) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  std::uint64_t get(int width) {
    if (remaining() < static_cast<std::size_t>(width))
      throw CheckpointError(CheckpointErrc::Corrupt, "checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = sizeof kMagic;
};

int as_size(std::uint32_t v) {
  if (v == 0 || v > (1u << 24)) throw CheckpointError(CheckpointErrc::Corrupt, "checkpoint: implausible layer size");
  return static_cast<int>(v);
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  if (!model.params.matches(model.network))
    throw CheckpointError(CheckpointErrc::ShapeMismatch, "save_checkpoint: parameters do not match config");
  const NetworkConfig& c = model.network;
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  for (int v : {c.grid_rows, c.grid_cols, c.branch_hidden1, c.branch_hidden2, c.fusion_hidden, c.output_size})
    w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(c.output_activation));
  w.u32(static_cast<std::uint32_t>(model.spec.scheme));
  w.f64(model.spec.j_deg);
  w.f64(model.spec.m);
  w.u32(static_cast<std::uint32_t>(model.pipeline.channel_pool));
  w.u32(static_cast<std::uint32_t>(model.pipeline.feature_pool));
  w.u64(model.params.parameter_count());
  for (const Layer& l : model.params.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index col = 0; col < l.weight.cols(); ++col) w.f64(l.weight(r, col));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f64(l.bias(r));
  }
  w.u64(fnv1a(w.bytes.data(), w.bytes.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrc::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrc::Io, "write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrc::Io, "cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError(CheckpointErrc::Corrupt, "not a checkpoint: " + path.string());

  Reader r(bytes, bytes.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointErrc::VersionMismatch,
                          "checkpoint format version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));

  if (bytes.size() < 8 + sizeof kMagic) throw CheckpointError(CheckpointErrc::Corrupt, "checkpoint truncated");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored_hash = 0;
  for (int i = 0; i < 8; ++i) stored_hash |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  if (stored_hash != fnv1a(bytes.data(), body))
    throw CheckpointError(CheckpointErrc::Corrupt, "checkpoint checksum mismatch (truncated or damaged file)");

  Reader h(bytes, body);
  h.u32();  // version, already checked
  Model m;
  NetworkConfig& c = m.network;
  c.grid_rows = as_size(h.u32());
  c.grid_cols = as_size(h.u32());
  c.branch_hidden1 = as_size(h.u32());
  c.branch_hidden2 = as_size(h.u32());
  c.fusion_hidden = as_size(h.u32());
  c.output_size = as_size(h.u32());
  const std::uint32_t act = h.u32();
  if (act > 1) throw CheckpointError(CheckpointErrc::Corrupt, "checkpoint: unknown output activation");
  c.output_activation = static_cast<OutputActivation>(act);
  const std::uint32_t scheme = h.u32();
  if (scheme > static_cast<std::uint32_t>(encoding::Scheme::Exp))
    throw CheckpointError(CheckpointErrc::Corrupt, "checkpoint: unknown encoding scheme");
  m.spec.scheme = static_cast<encoding::Scheme>(scheme);
  m.spec.j_deg = h.f64();
  m.spec.m = h.f64();
  m.pipeline.channel_pool = as_size(h.u32());
  m.pipeline.feature_pool = as_size(h.u32());
  try {
    m.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(CheckpointErrc::Corrupt, std::string("checkpoint: ") + e.what());
  }

  const std::uint64_t count = h.u64();
  m.params = zeros_like(init_params(c, 0));
  if (count != m.params.parameter_count() || h.remaining() != count * 8)
    throw CheckpointError(CheckpointErrc::Corrupt, "checkpoint: parameter block does not match header");
  for (Layer& l : m.params.layers) {
    for (Eigen::Index row = 0; row < l.weight.rows(); ++row)
      for (Eigen::Index col = 0; col < l.weight.cols(); ++col) l.weight(row, col) = h.f64();
    for (Eigen::Index row = 0; row < l.bias.size(); ++row) l.bias(row) = h.f64();
  }
  if (!m.params.all_finite()) throw CheckpointError(CheckpointErrc::Corrupt, "checkpoint: non-finite parameters");
  return m;
}

Model load_checkpoint(const std::filesystem::path& path, const NetworkConfig& expected_network,
                      const encoding::EncodingSpec& expected_spec) {
  Model m = load_checkpoint(path);
  if (!(m.network == expected_network) || !(m.spec == expected_spec))
    throw CheckpointError(CheckpointErrc::ShapeMismatch,
                          "checkpoint " + path.string() + " was trained with a different network or encoding (" +
                              std::string(encoding::to_token(m.spec.scheme)) + ", j=" + std::to_string(m.spec.j_deg) +
                              ", " + std::to_string(m.network.output_size) + " outputs)");
  return m;
}

}  // namespace skycompass::network
