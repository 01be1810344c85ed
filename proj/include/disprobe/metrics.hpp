#pragma once

#include <map>
#include <string>
#include <vector>

#include "disprobe/corruption.hpp"
#include "disprobe/image.hpp"

namespace disprobe {

// Dataset means weight each sample equally by default; the pixel-weighted
// alternative weights samples by their valid-pixel counts.
enum class SampleWeighting { PerSample, PerPixel };

struct SampleEpe {
  std::string id;
  double epe = 0.0;
  long n_pixels = 0;  // valid pixels only
};

struct MetricSummary {
  double mean_epe = 0.0;
  long n_pixels = 0;
  int n_samples = 0;
  std::vector<SampleEpe> per_sample;
};

// mean over valid gt pixels of |pred - gt|; MetricError when no pixel is
// valid, ShapeError on mismatch.
double epe(const DisparityMap& pred, const DisparityMap& gt);

// same, also reporting the valid-pixel count
double epe(const DisparityMap& pred, const DisparityMap& gt, long& n_valid);

double dataset_mean_epe(const std::vector<double>& per_sample_epes);

MetricSummary summarize(const std::vector<SampleEpe>& per_sample,
                        SampleWeighting weighting = SampleWeighting::PerSample);

// mean over all 15 corruption kinds; MetricError unless every kind is present
double mc_epe(const std::map<CorruptionKind, double>& per_corruption_means);

// sample Pearson correlation; MetricError on length < 2, length mismatch,
// or zero variance
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace disprobe
