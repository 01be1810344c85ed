#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disprobe/errors.hpp"

namespace disprobe {

// H x W x C image, row-major, values in [0,1] once loaded.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3
  std::vector<double> data;

  ImageBuffer() = default;
  ImageBuffer(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {}

  double& at(int i, int j, int c) {
    return data[(static_cast<size_t>(i) * width + j) * channels + c];
  }
  double at(int i, int j, int c) const {
    return data[(static_cast<size_t>(i) * width + j) * channels + c];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const ImageBuffer& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Per-pixel disparity in pixels with a validity mask.
struct DisparityMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::vector<uint8_t> valid;

  DisparityMap() = default;
  DisparityMap(int h, int w, double fill = 0.0, bool all_valid = true)
      : height(h), width(w),
        values(static_cast<size_t>(h) * w, fill),
        valid(static_cast<size_t>(h) * w, all_valid ? 1 : 0) {}

  double& at(int i, int j) { return values[static_cast<size_t>(i) * width + j]; }
  double at(int i, int j) const { return values[static_cast<size_t>(i) * width + j]; }
  bool is_valid(int i, int j) const { return valid[static_cast<size_t>(i) * width + j] != 0; }
};

struct StereoSample {
  ImageBuffer left;
  ImageBuffer right;
  DisparityMap gt;
  std::string id;

  void check_consistent() const {
    if (left.height != right.height || left.width != right.width ||
        left.channels != right.channels)
      throw FormatError("stereo sample: left/right dimension mismatch");
    if (gt.height != left.height || gt.width != left.width)
      throw FormatError("stereo sample: ground-truth dimension mismatch");
  }
};

}  // namespace disprobe
