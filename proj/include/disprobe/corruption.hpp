#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "disprobe/image.hpp"

namespace disprobe {

enum class CorruptionKind {
  GaussianNoise,
  ShotNoise,
  ImpulseNoise,
  DefocusBlur,
  FrostedGlassBlur,
  MotionBlur,
  ZoomBlur,
  Snow,
  Frost,
  Fog,
  Brightness,
  Contrast,
  Elastic,
  Pixelate,
  Jpeg,
};

inline constexpr int kNumCorruptionKinds = 15;

const std::array<CorruptionKind, kNumCorruptionKinds>& all_corruption_kinds();
std::string to_string(CorruptionKind kind);
CorruptionKind parse_corruption_kind(const std::string& name);  // ConfigError

struct CorruptionSpec {
  CorruptionKind kind;
  int severity;  // 1..5
  uint64_t seed = 0;

  void validate() const;
};

// Severity parameter tables, loaded from the config file shipped under
// data/. The file hash travels with every evaluation record.
class CorruptionParams {
 public:
  static CorruptionParams load(const std::string& path);

  double get(const std::string& key, int severity) const;  // severity 1..5
  const std::string& file_hash() const { return file_hash_; }

 private:
  std::map<std::string, std::array<double, 5>> tables_;
  std::string file_hash_;
};

ImageBuffer apply_corruption(const ImageBuffer& image, const CorruptionSpec& spec,
                             const CorruptionParams& params);

StereoSample corrupt_stereo_pair(const StereoSample& sample,
                                 const CorruptionSpec& spec,
                                 const CorruptionParams& params);

// Pixels resampled at positions displaced by a Gaussian-smoothed seeded
// random field scaled to magnitude alpha; bilinear sampling, edge clamp.
ImageBuffer elastic_transform(const ImageBuffer& image, double alpha,
                              double sigma, uint64_t seed);

}  // namespace disprobe
