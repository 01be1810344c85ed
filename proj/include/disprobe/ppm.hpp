#pragma once

#include <cstdint>
#include <vector>

#include "disprobe/image.hpp"

namespace disprobe {

// Binary P5 (gray) / P6 (rgb), 8-bit, normalized by /255.
ImageBuffer parse_ppm(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> write_ppm(const ImageBuffer& img);

}  // namespace disprobe
