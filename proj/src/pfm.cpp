#include "disprobe/pfm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace disprobe {

namespace {

// Reads one whitespace-delimited ASCII token starting at *pos.
std::string next_token(const std::vector<uint8_t>& bytes, size_t* pos) {
  while (*pos < bytes.size() && std::isspace(bytes[*pos])) ++*pos;
  std::string tok;
  while (*pos < bytes.size() && !std::isspace(bytes[*pos]))
    tok.push_back(static_cast<char>(bytes[(*pos)++]));
  return tok;
}

bool host_is_little_endian() {
  return std::endian::native == std::endian::little;
}

}  // namespace

PfmData parse_pfm(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  std::string magic = next_token(bytes, &pos);
  int channels;
  if (magic == "PF")
    channels = 3;
  else if (magic == "Pf")
    channels = 1;
  else
    throw FormatError("pfm: bad magic");

  std::string wtok = next_token(bytes, &pos);
  std::string htok = next_token(bytes, &pos);
  std::string stok = next_token(bytes, &pos);
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(wtok);
    height = std::stoi(htok);
    scale = std::stod(stok);
  } catch (const std::exception&) {
    throw FormatError("pfm: malformed header");
  }
  if (width <= 0 || height <= 0)
    throw FormatError("pfm: non-positive dimensions");
  if (scale == 0.0) throw FormatError("pfm: zero scale");

  // Exactly one whitespace byte separates the header from the payload.
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError("pfm: missing header terminator");
  ++pos;

  const bool file_little = scale < 0.0;
  const size_t count = static_cast<size_t>(width) * height * channels;
  if (bytes.size() - pos < count * 4)
    throw FormatError("pfm: truncated payload");

  PfmData out;
  out.height = height;
  out.width = width;
  out.channels = channels;
  out.data.resize(count);

  // Rows are stored bottom-up in the file; flip to top-down.
  const bool swap = file_little != host_is_little_endian();
  for (int i = 0; i < height; ++i) {
    const int src_row = height - 1 - i;
    const uint8_t* src = bytes.data() + pos +
                         static_cast<size_t>(src_row) * width * channels * 4;
    float* dst = out.data.data() + static_cast<size_t>(i) * width * channels;
    std::memcpy(dst, src, static_cast<size_t>(width) * channels * 4);
    if (swap) {
      for (int k = 0; k < width * channels; ++k) {
        uint32_t v;
        std::memcpy(&v, dst + k, 4);
        v = __builtin_bswap32(v);
        std::memcpy(dst + k, &v, 4);
      }
    }
  }
  return out;
}

std::vector<uint8_t> write_pfm(const PfmData& data) {
  for (float v : data.data)
    if (!std::isfinite(v)) throw EncodeError("pfm: non-finite value");
  if (data.channels != 1 && data.channels != 3)
    throw EncodeError("pfm: channels must be 1 or 3");

  char header[64];
  int n = std::snprintf(header, sizeof header, "%s\n%d %d\n-1.0\n",
                        data.channels == 3 ? "PF" : "Pf", data.width,
                        data.height);
  std::vector<uint8_t> out(header, header + n);

  const size_t row_bytes = static_cast<size_t>(data.width) * data.channels * 4;
  const size_t payload_off = out.size();
  out.resize(out.size() + row_bytes * data.height);
  for (int i = 0; i < data.height; ++i) {
    // bottom-up on disk
    const float* src =
        data.data.data() + static_cast<size_t>(data.height - 1 - i) *
                               data.width * data.channels;
    uint8_t* dst = out.data() + payload_off + static_cast<size_t>(i) * row_bytes;
    std::memcpy(dst, src, row_bytes);
    if (!host_is_little_endian()) {
      for (size_t k = 0; k < row_bytes / 4; ++k) {
        uint32_t v;
        std::memcpy(&v, dst + k * 4, 4);
        v = __builtin_bswap32(v);
        std::memcpy(dst + k * 4, &v, 4);
      }
    }
  }
  return out;
}

DisparityMap PfmData::to_disparity() const {
  if (channels != 1) throw FormatError("pfm: disparity payload must be 1-channel");
  DisparityMap map(height, width);
  for (size_t k = 0; k < data.size(); ++k) {
    double v = data[k];
    map.values[k] = v;
    map.valid[k] = (std::isfinite(v) && v >= 0.0) ? 1 : 0;
  }
  return map;
}

ImageBuffer PfmData::to_image() const {
  ImageBuffer img(height, width, channels);
  for (size_t k = 0; k < data.size(); ++k)
    img.data[k] = std::clamp(static_cast<double>(data[k]), 0.0, 1.0);
  return img;
}

PfmData PfmData::from_disparity(const DisparityMap& map) {
  PfmData out;
  out.height = map.height;
  out.width = map.width;
  out.channels = 1;
  out.data.resize(map.values.size());
  for (size_t k = 0; k < map.values.size(); ++k)
    out.data[k] = static_cast<float>(map.values[k]);
  return out;
}

PfmData PfmData::from_image(const ImageBuffer& img) {
  PfmData out;
  out.height = img.height;
  out.width = img.width;
  out.channels = img.channels;
  out.data.resize(img.data.size());
  for (size_t k = 0; k < img.data.size(); ++k)
    out.data[k] = static_cast<float>(img.data[k]);
  return out;
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(f),
                              std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path);
}

}  // namespace disprobe
