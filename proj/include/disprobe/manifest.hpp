#pragma once

#include <string>
#include <vector>

#include "disprobe/image.hpp"

namespace disprobe {

enum class GtFormat { Pfm, KittiPng16 };

struct ManifestEntry {
  std::string left_path;
  std::string right_path;
  std::string gt_path;
  GtFormat gt_format;
};

struct DatasetManifest {
  std::string name;
  std::vector<ManifestEntry> entries;
};

// One "left,right,gt,format" entry per line; '#' starts a comment.
DatasetManifest load_manifest(const std::string& path);

// Loads an image by extension: .pfm, .png, .ppm/.pgm.
ImageBuffer load_image(const std::string& path);
void save_image(const std::string& path, const ImageBuffer& img);

StereoSample load_sample(const DatasetManifest& manifest, size_t index);

}  // namespace disprobe
