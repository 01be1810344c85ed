#pragma once

#include <cstdint>
#include <vector>

#include "disprobe/image.hpp"

namespace disprobe {

// Baseline sequential JPEG, 4:2:0 subsampling, Annex-K quantization tables
// scaled by quality and Annex-K Huffman tables.
std::vector<uint8_t> encode_jpeg(const ImageBuffer& rgb, int quality);

// Decodes baseline sequential JFIF streams (grayscale or YCbCr, sampling
// factors up to 2x2, optional restart markers).
ImageBuffer decode_jpeg(const std::vector<uint8_t>& bytes);

// Encode-then-decode; realizes the `jpeg' corruption kind.
ImageBuffer jpeg_roundtrip(const ImageBuffer& rgb, int quality);

}  // namespace disprobe
