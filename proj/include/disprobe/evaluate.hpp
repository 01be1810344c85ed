#pragma once

#include <string>

#include "disprobe/cache.hpp"
#include "disprobe/manifest.hpp"
#include "disprobe/stereo_model.hpp"

namespace disprobe {

struct EvalOptions {
  std::string cache_dir;    // "" -> DISPROBE_CACHE_DIR or .disprobe-cache
  std::string params_path;  // corruption parameter table
  int jobs = 1;
  SampleWeighting weighting = SampleWeighting::PerSample;
};

// Dispatches on the threat variant, consults the cache when
// retrieve_existing is set, and stores the record on completion. Failures
// propagate and leave no cache entry.
EvalRecord evaluate(const EvalRequest& request, const EvalOptions& options);

// Evaluation without cache plumbing, for callers that already resolved the
// model and dataset.
EvalRecord evaluate_uncached(const EvalRequest& request,
                             const StereoModel& model,
                             const DatasetManifest& manifest,
                             const CorruptionParams& params,
                             const EvalOptions& options);

}  // namespace disprobe
