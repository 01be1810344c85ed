#pragma once

#include <cstdint>
#include <vector>

#include "disprobe/image.hpp"

namespace disprobe {

// 8-bit gray or RGB PNG -> image normalized by /255.
ImageBuffer parse_png_image(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> write_png_image(const ImageBuffer& img);

// KITTI disparity carrier: 16-bit single-channel PNG, disparity = code/256,
// code 0 marks an invalid pixel.
DisparityMap parse_kitti_disparity(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> write_kitti_disparity(const DisparityMap& map);

}  // namespace disprobe
