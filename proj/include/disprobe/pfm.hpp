#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disprobe/image.hpp"

namespace disprobe {

// Decoded PFM payload, rows already flipped to top-down. Values are kept as
// the raw 32-bit floats from the file so round trips are byte-exact.
struct PfmData {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 for "Pf", 3 for "PF"
  std::vector<float> data;  // H x W x C, row-major, top-down

  DisparityMap to_disparity() const;  // 1-channel only; no clamping
  ImageBuffer to_image() const;       // values clamped into [0,1]
  static PfmData from_disparity(const DisparityMap& map);
  static PfmData from_image(const ImageBuffer& img);
};

PfmData parse_pfm(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> write_pfm(const PfmData& data);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace disprobe
