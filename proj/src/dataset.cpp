#include <skycompass/dataset.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include <skycompass/angles.hpp>
#include <skycompass/pgm.hpp>

namespace skycompass::skysim {

namespace fs = std::filesystem;
using nlohmann::json;

void GenerationConfig::validate() const {
  CameraRig{0.0, width, height, fov_deg, dop_max}.validate();
  pattern.validate();
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  if (bit_depth < 1 || bit_depth > 16) throw std::invalid_argument("bit depth must be in [1, 16]");
  if (heading_step_deg < 0.0) throw std::invalid_argument("heading step must be non-negative");
  if (heading_step_deg > 0.0) {
    const double n = 360.0 / heading_step_deg;
    if (std::fabs(n - std::round(n)) > 1e-9 * n) throw std::invalid_argument("heading step must divide 360");
  }
  if (sun_azimuth_max_deg < sun_azimuth_min_deg) throw std::invalid_argument("sun azimuth range is empty");
  if (sun_altitude_max_deg < sun_altitude_min_deg || sun_altitude_min_deg < -90.0 ||
      sun_altitude_max_deg > 90.0)
    throw std::invalid_argument("sun altitude range must be a non-empty subset of [-90, 90]");
}

namespace {

std::mt19937_64 sample_stream(std::uint64_t seed, std::size_t index) {
  const auto idx = static_cast<std::uint64_t>(index);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

SampleMeta draw_sample_meta(const GenerationConfig& config, std::size_t index) {
  std::mt19937_64 rng = sample_stream(config.seed, index);
  SampleMeta meta;
  meta.index = index;
  if (config.heading_step_deg > 0.0) {
    const auto n = static_cast<long>(std::lround(360.0 / config.heading_step_deg));
    const long k = std::uniform_int_distribution<long>(0, n - 1)(rng);
    meta.heading_deg = static_cast<double>(k) * config.heading_step_deg;
  } else {
    meta.heading_deg = wrap_360(uniform_in(rng, 0.0, 360.0));
  }
  const double az = uniform_in(rng, config.sun_azimuth_min_deg, config.sun_azimuth_max_deg);
  const double alt = uniform_in(rng, config.sun_altitude_min_deg, config.sun_altitude_max_deg);
  meta.sun = SunPosition::make(az, alt);
  meta.dop_max = config.dop_max;
  meta.noise_sigma = config.noise_sigma;
  meta.rng_seed = rng();
  meta.bit_depth = config.bit_depth;
  meta.pattern = config.pattern;
  meta.width = config.width;
  meta.height = config.height;
  meta.fov_deg = config.fov_deg;
  return meta;
}

MosaicImage render_sample(const SampleMeta& meta) {
  const SkyStokesField field = synthesize_field(meta.rig(), meta.sun);
  std::mt19937_64 rng(meta.rng_seed);
  return synthesize_mosaic(field, meta.pattern, meta.noise_sigma, meta.bit_depth, rng);
}

std::string sample_basename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%06zu", index);
  return buf;
}

std::string meta_to_json(const SampleMeta& meta) {
  json j;
  j["index"] = meta.index;
  j["heading_deg"] = meta.heading_deg;
  j["sun_azimuth_deg"] = meta.sun.azimuth_deg;
  j["sun_altitude_deg"] = meta.sun.altitude_deg;
  j["dop_max"] = meta.dop_max;
  j["noise_sigma"] = meta.noise_sigma;
  j["rng_seed"] = meta.rng_seed;
  j["bit_depth"] = meta.bit_depth;
  j["pattern"] = meta.pattern.angles_deg;
  j["width"] = meta.width;
  j["height"] = meta.height;
  j["fov_deg"] = meta.fov_deg;
  return j.dump(2) + "\n";
}

SampleMeta meta_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SampleMeta meta;
    meta.index = j.at("index").get<std::size_t>();
    meta.heading_deg = j.at("heading_deg").get<double>();
    meta.sun = SunPosition::make(j.at("sun_azimuth_deg").get<double>(), j.at("sun_altitude_deg").get<double>());
    meta.dop_max = j.at("dop_max").get<double>();
    meta.noise_sigma = j.at("noise_sigma").get<double>();
    meta.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    meta.bit_depth = j.at("bit_depth").get<int>();
    meta.pattern.angles_deg = j.at("pattern").get<std::array<int, 4>>();
    meta.pattern.validate();
    meta.width = j.value("width", 64);
    meta.height = j.value("height", 64);
    meta.fov_deg = j.value("fov_deg", 90.0);
    return meta;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("sidecar: ") + e.what());
  }
}

void write_sample(const fs::path& dir, const Sample& sample) {
  const std::string base = sample_basename(sample.meta.index);
  pgm::Graymap g{sample.mosaic.width, sample.mosaic.height, static_cast<int>(sample.mosaic.full_scale()),
                 sample.mosaic.pixels};
  pgm::write(dir / (base + ".pgm"), g);
  std::ofstream side(dir / (base + ".json"), std::ios::binary | std::ios::trunc);
  side << meta_to_json(sample.meta);
  if (!side) throw std::runtime_error("cannot write sidecar for " + base);
}

MosaicImage mosaic_from_pgm(const fs::path& path, int bit_depth, const PolarizerPattern& pattern) {
  pgm::Graymap g = pgm::read(path);
  MosaicImage img(g.width, g.height, bit_depth, pattern);
  if (g.maxval != static_cast<int>(img.full_scale()))
    throw std::runtime_error("pgm maxval " + std::to_string(g.maxval) + " does not match bit depth " +
                             std::to_string(bit_depth));
  img.pixels = std::move(g.samples);
  return img;
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Sample read_sample(const fs::path& dir, const std::string& basename) {
  Sample s;
  s.meta = meta_from_json(read_text(dir / (basename + ".json")));
  s.mosaic = mosaic_from_pgm(dir / (basename + ".pgm"), s.meta.bit_depth, s.meta.pattern);
  return s;
}

DatasetManifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw std::runtime_error("no dataset manifest in " + dir.string());
  DatasetManifest m{dir, {}};
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) m.basenames.push_back(line);
  return m;
}

std::vector<Sample> load_dataset(const fs::path& dir) {
  const DatasetManifest m = read_manifest(dir);
  std::vector<Sample> out;
  out.reserve(m.basenames.size());
  for (const auto& b : m.basenames) out.push_back(read_sample(dir, b));
  return out;
}

DatasetManifest generate_dataset(const GenerationConfig& config, const fs::path& out_dir) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<fs::path> written;
  std::mutex written_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;

  auto worker = [&] {
    for (std::size_t i = next++; i < config.count && !failed; i = next++) {
      Sample s;
      s.meta = draw_sample_meta(config, i);
      s.mosaic = render_sample(s.meta);
      const std::string base = sample_basename(i);
      {
        std::lock_guard lock(written_mutex);
        written.push_back(out_dir / (base + ".pgm"));
        written.push_back(out_dir / (base + ".json"));
      }
      try {
        write_sample(out_dir, s);
      } catch (const std::exception& e) {
        std::lock_guard lock(written_mutex);
        if (!failed.exchange(true)) failure = e.what();
      }
    }
  };

  const unsigned n_threads = std::max(1u, config.threads);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  DatasetManifest manifest{out_dir, {}};
  if (!failed) {
    for (std::size_t i = 0; i < config.count; ++i) manifest.basenames.push_back(sample_basename(i));
    std::ofstream out(out_dir / kManifestName, std::ios::binary | std::ios::trunc);
    for (const auto& b : manifest.basenames) out << b << '\n';
    out.flush();
    if (!out) {
      failed = true;
      failure = "cannot write manifest in " + out_dir.string();
      written.push_back(out_dir / kManifestName);
    }
  }
  if (failed) {
    for (const auto& p : written) fs::remove(p, ec);
    throw std::runtime_error("dataset generation failed: " + failure);
  }
  return manifest;
}

}  // namespace skycompass::skysim
