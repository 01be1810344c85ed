#include "disprobe/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace disprobe {

namespace {

struct MemReader {
  const std::vector<uint8_t>* bytes;
  size_t pos = 0;
};

void read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->bytes->size())
    png_error(png, "truncated png");
  std::memcpy(out, r->bytes->data() + r->pos, n);
  r->pos += n;
}

void write_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void flush_cb(png_structp) {}

struct Decoded {
  int height, width, channels, bit_depth;
  std::vector<uint16_t> pixels;  // H x W x C
};

Decoded decode_png(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw FormatError("png: bad signature");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> row_ptrs;
  Decoded out;
  MemReader reader{&bytes};

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: decode failed");
  }

  png_set_read_fn(png, &reader, read_cb);
  png_read_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  if (out.bit_depth == 16) png_set_swap(png);  // little-endian in memory
  png_read_update_info(png, info);

  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<uint8_t> raw(row_bytes * out.height);
  row_ptrs.resize(out.height);
  for (int i = 0; i < out.height; ++i) row_ptrs[i] = raw.data() + i * row_bytes;
  png_read_image(png, row_ptrs.data());
  png_destroy_read_struct(&png, &info, nullptr);

  const size_t count = static_cast<size_t>(out.height) * out.width * out.channels;
  out.pixels.resize(count);
  if (out.bit_depth == 16) {
    const uint16_t* src = reinterpret_cast<const uint16_t*>(raw.data());
    std::copy(src, src + count, out.pixels.begin());
  } else {
    for (size_t k = 0; k < count; ++k) out.pixels[k] = raw[k];
  }
  return out;
}

}  // namespace

ImageBuffer parse_png_image(const std::vector<uint8_t>& bytes) {
  Decoded d = decode_png(bytes);
  if (d.channels != 1 && d.channels != 3)
    throw FormatError("png: expected gray or rgb image");
  const double maxv = d.bit_depth == 16 ? 65535.0 : 255.0;
  ImageBuffer img(d.height, d.width, d.channels);
  for (size_t k = 0; k < d.pixels.size(); ++k) img.data[k] = d.pixels[k] / maxv;
  return img;
}

std::vector<uint8_t> write_png_image(const ImageBuffer& img) {
  if (img.channels != 1 && img.channels != 3)
    throw EncodeError("png: channels must be 1 or 3");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  std::vector<uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw EncodeError("png: encode failed");
  }
  png_set_write_fn(png, &out, write_cb, flush_cb);
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> row(static_cast<size_t>(img.width) * img.channels);
  for (int i = 0; i < img.height; ++i) {
    for (int k = 0; k < img.width * img.channels; ++k) {
      double v = img.data[static_cast<size_t>(i) * img.width * img.channels + k];
      row[k] = static_cast<uint8_t>(
          std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return out;
}

DisparityMap parse_kitti_disparity(const std::vector<uint8_t>& bytes) {
  Decoded d = decode_png(bytes);
  if (d.bit_depth != 16) throw FormatError("kitti disparity: png must be 16-bit");
  if (d.channels != 1)
    throw FormatError("kitti disparity: png must be single-channel");
  DisparityMap map(d.height, d.width);
  for (size_t k = 0; k < d.pixels.size(); ++k) {
    uint16_t code = d.pixels[k];
    if (code == 0) {
      map.values[k] = 0.0;
      map.valid[k] = 0;
    } else {
      map.values[k] = code / 256.0;
      map.valid[k] = 1;
    }
  }
  return map;
}

std::vector<uint8_t> write_kitti_disparity(const DisparityMap& map) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  std::vector<uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw EncodeError("png: encode failed");
  }
  png_set_write_fn(png, &out, write_cb, flush_cb);
  png_set_IHDR(png, info, map.width, map.height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> row(static_cast<size_t>(map.width) * 2);
  for (int i = 0; i < map.height; ++i) {
    for (int j = 0; j < map.width; ++j) {
      uint16_t code = 0;
      if (map.is_valid(i, j)) {
        double scaled = std::clamp(map.at(i, j), 0.0, 65535.0 / 256.0) * 256.0;
        code = static_cast<uint16_t>(std::max(1L, std::lround(scaled)));
      }
      row[2 * j] = static_cast<uint8_t>(code >> 8);  // network byte order
      row[2 * j + 1] = static_cast<uint8_t>(code & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace disprobe
