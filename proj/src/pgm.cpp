#include <skycompass/pgm.hpp>

#include <cctype>
#include <fstream>
#include <stdexcept>
#include <string>

namespace skycompass::pgm {

void write(const std::filesystem::path& path, const Graymap& image) {
  if (image.maxval < 1 || image.maxval > 65535)
    throw std::invalid_argument("pgm: maxval out of range");
  if (image.samples.size() != static_cast<std::size_t>(image.width) * image.height)
    throw std::invalid_argument("pgm: sample count does not match dimensions");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("pgm: cannot open " + path.string() + " for writing");

  out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  const bool wide = image.maxval > 255;
  std::vector<char> payload;
  payload.reserve(image.samples.size() * (wide ? 2 : 1));
  for (std::uint16_t v : image.samples) {
    if (v > image.maxval) throw std::invalid_argument("pgm: sample exceeds maxval");
    if (wide) payload.push_back(static_cast<char>(v >> 8));
    payload.push_back(static_cast<char>(v & 0xff));
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("pgm: write failed for " + path.string());
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!token.empty()) break;
    } else {
      token.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return token;
}

int parse_int(const std::string& token, const char* what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("pgm: bad ") + what + " '" + token + "'");
  }
}

}  // namespace

Graymap read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm: cannot open " + path.string());

  if (next_token(in) != "P5") throw std::runtime_error("pgm: not a binary graymap: " + path.string());
  Graymap image;
  image.width = parse_int(next_token(in), "width");
  image.height = parse_int(next_token(in), "height");
  image.maxval = parse_int(next_token(in), "maxval");
  if (image.width <= 0 || image.height <= 0 || image.maxval < 1 || image.maxval > 65535)
    throw std::runtime_error("pgm: invalid header in " + path.string());

  const std::size_t count = static_cast<std::size_t>(image.width) * image.height;
  const bool wide = image.maxval > 255;
  std::vector<unsigned char> payload(count * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size())
    throw std::runtime_error("pgm: truncated payload in " + path.string());

  image.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint16_t v = wide ? static_cast<std::uint16_t>((payload[2 * i] << 8) | payload[2 * i + 1])
                           : payload[i];
    if (v > image.maxval) throw std::runtime_error("pgm: sample exceeds maxval in " + path.string());
    image.samples[i] = v;
  }
  return image;
}

}  // namespace skycompass::pgm
