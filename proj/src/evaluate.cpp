#include "disprobe/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "disprobe/attacks.hpp"
#include "disprobe/corruption.hpp"
#include "disprobe/errors.hpp"
#include "disprobe/metrics.hpp"
#include "disprobe/rng.hpp"

namespace disprobe {

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// runs fn(i) for i in [0, n) across the worker pool, rethrowing the first
// captured exception
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  std::exception_ptr error;
  std::mutex error_mutex;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
#endif
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

MetricSummary clean_summary(const StereoModel& model,
                            const std::vector<StereoSample>& samples,
                            int jobs, SampleWeighting weighting) {
  std::vector<SampleEpe> per_sample(samples.size());
  parallel_for(static_cast<int>(samples.size()), jobs, [&](int i) {
    const DisparityMap pred = model.predict(samples[i]);
    long n = 0;
    const double e = epe(pred, samples[i].gt, n);
    per_sample[i] = {samples[i].id, e, n};
  });
  return summarize(per_sample, weighting);
}

void run_attack_eval(EvalRecord& record, const EvalRequest& request,
                     const StereoModel& model,
                     const std::vector<StereoSample>& samples,
                     const EvalOptions& options) {
  std::vector<SampleEpe> clean(samples.size()), adv(samples.size());
  std::vector<AttackSampleStat> stats(samples.size());
  parallel_for(static_cast<int>(samples.size()), options.jobs, [&](int i) {
    const StereoSample& sample = samples[i];
    AttackConfig config = request.threat.attack;
    // one deterministic attack seed per sample
    config.seed = RngStream(request.seed ^ config.seed)
                      .substream(sample.id)
                      .next_u64();
    const AttackResult result = run_attack(model, sample, config);

    long n = 0;
    const double clean_epe = epe(model.predict(sample), sample.gt, n);
    clean[i] = {sample.id, clean_epe, n};
    const double adv_epe =
        epe(model.predict(result.adversarial), sample.gt, n);
    adv[i] = {sample.id, adv_epe, n};

    const IterStat& last = result.trace.back();
    stats[i] = {sample.id, clean_epe, adv_epe,
                std::max(last.linf_left, last.linf_right),
                std::hypot(last.l2_left, last.l2_right), result.final_loss};
  });
  record.summaries["clean"] = summarize(clean, options.weighting);
  record.summaries["adversarial"] = summarize(adv, options.weighting);
  record.attack_samples = std::move(stats);
}

void run_corruption_eval(EvalRecord& record, const EvalRequest& request,
                         const StereoModel& model,
                         const std::vector<StereoSample>& samples,
                         const CorruptionParams& params,
                         const EvalOptions& options) {
  const auto& kinds = all_corruption_kinds();
  const int n_samples = static_cast<int>(samples.size());
  const int n_work = kNumCorruptionKinds * n_samples;
  std::vector<std::vector<SampleEpe>> per_kind(
      kNumCorruptionKinds, std::vector<SampleEpe>(samples.size()));

  parallel_for(n_work, options.jobs, [&](int w) {
    const int ki = w / n_samples;
    const int si = w % n_samples;
    const StereoSample& sample = samples[si];
    const CorruptionSpec spec{kinds[ki], request.threat.severity,
                              request.seed};
    const StereoSample corrupted = corrupt_stereo_pair(sample, spec, params);
    long n = 0;
    const double e = epe(model.predict(corrupted), sample.gt, n);
    per_kind[ki][si] = {sample.id, e, n};
  });

  std::map<CorruptionKind, double> means;
  for (int ki = 0; ki < kNumCorruptionKinds; ++ki) {
    MetricSummary s = summarize(per_kind[ki], options.weighting);
    means[kinds[ki]] = s.mean_epe;
    record.summaries[to_string(kinds[ki])] = std::move(s);
  }
  record.mc_epe = mc_epe(means);
}

}  // namespace

EvalRecord evaluate_uncached(const EvalRequest& request,
                             const StereoModel& model,
                             const DatasetManifest& manifest,
                             const CorruptionParams& params,
                             const EvalOptions& options) {
  const auto start = std::chrono::steady_clock::now();

  std::vector<StereoSample> samples;
  samples.reserve(manifest.entries.size());
  for (size_t i = 0; i < manifest.entries.size(); ++i)
    samples.push_back(load_sample(manifest, i));
  if (samples.empty())
    throw ConfigError("dataset '" + request.dataset + "' is empty");

  EvalRecord record;
  record.fingerprint = request_fingerprint(request, params.file_hash());
  record.model_name = request.model_name;
  record.dataset = request.dataset;
  record.dataset_name = manifest.name;
  record.version = kToolkitVersion;
  record.params_hash = params.file_hash();
  record.seed = request.seed;
  record.threat = request.threat;

  switch (request.threat.variant) {
    case ThreatVariant::None:
      record.summaries["clean"] =
          clean_summary(model, samples, options.jobs, options.weighting);
      break;
    case ThreatVariant::Attack:
      run_attack_eval(record, request, model, samples, options);
      break;
    case ThreatVariant::CommonCorruption2D:
      run_corruption_eval(record, request, model, samples, params, options);
      break;
  }

  record.created_at = utc_now();
  record.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return record;
}

EvalRecord evaluate(const EvalRequest& request, const EvalOptions& options) {
  const CorruptionParams params = CorruptionParams::load(options.params_path);
  const ResultCache cache(ResultCache::resolve_dir(options.cache_dir));

  const std::string fingerprint =
      request_fingerprint(request, params.file_hash());
  if (request.retrieve_existing) {
    if (auto hit = cache.lookup(fingerprint)) return *hit;
  }

  const StereoModel model(ModelConfig::preset(request.model_name));
  const DatasetManifest manifest = load_manifest(request.dataset);
  EvalRecord record =
      evaluate_uncached(request, model, manifest, params, options);
  cache.store(record);
  return record;
}

}  // namespace disprobe
