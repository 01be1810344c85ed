#include "disprobe/ppm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace disprobe {

namespace {

// Token reader that skips '#' comment lines.
std::string pnm_token(const std::vector<uint8_t>& bytes, size_t* pos) {
  for (;;) {
    while (*pos < bytes.size() && std::isspace(bytes[*pos])) ++*pos;
    if (*pos < bytes.size() && bytes[*pos] == '#') {
      while (*pos < bytes.size() && bytes[*pos] != '\n') ++*pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (*pos < bytes.size() && !std::isspace(bytes[*pos]))
    tok.push_back(static_cast<char>(bytes[(*pos)++]));
  return tok;
}

}  // namespace

ImageBuffer parse_ppm(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  std::string magic = pnm_token(bytes, &pos);
  int channels;
  if (magic == "P6")
    channels = 3;
  else if (magic == "P5")
    channels = 1;
  else
    throw FormatError("ppm: bad magic");

  int width, height, maxval;
  try {
    width = std::stoi(pnm_token(bytes, &pos));
    height = std::stoi(pnm_token(bytes, &pos));
    maxval = std::stoi(pnm_token(bytes, &pos));
  } catch (const std::exception&) {
    throw FormatError("ppm: malformed header");
  }
  if (width <= 0 || height <= 0) throw FormatError("ppm: non-positive dims");
  if (maxval != 255) throw FormatError("ppm: only 8-bit maxval supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError("ppm: missing header terminator");
  ++pos;

  const size_t count = static_cast<size_t>(width) * height * channels;
  if (bytes.size() - pos < count) throw FormatError("ppm: truncated payload");

  ImageBuffer img(height, width, channels);
  for (size_t k = 0; k < count; ++k) img.data[k] = bytes[pos + k] / 255.0;
  return img;
}

std::vector<uint8_t> write_ppm(const ImageBuffer& img) {
  if (img.channels != 1 && img.channels != 3)
    throw EncodeError("ppm: channels must be 1 or 3");
  char header[64];
  int n = std::snprintf(header, sizeof header, "%s\n%d %d\n255\n",
                        img.channels == 3 ? "P6" : "P5", img.width, img.height);
  std::vector<uint8_t> out(header, header + n);
  out.reserve(out.size() + img.data.size());
  for (double v : img.data)
    out.push_back(
        static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return out;
}

}  // namespace disprobe
