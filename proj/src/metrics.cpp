#include "disprobe/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "disprobe/errors.hpp"

namespace disprobe {

double epe(const DisparityMap& pred, const DisparityMap& gt, long& n_valid) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw ShapeError("epe: shape mismatch");
  double sum = 0.0;
  long n = 0;
  for (size_t k = 0; k < gt.values.size(); ++k) {
    if (!gt.valid[k]) continue;
    sum += std::abs(pred.values[k] - gt.values[k]);
    ++n;
  }
  if (n == 0) throw MetricError("epe: no valid ground-truth pixels");
  n_valid = n;
  return sum / static_cast<double>(n);
}

double epe(const DisparityMap& pred, const DisparityMap& gt) {
  long n = 0;
  return epe(pred, gt, n);
}

double dataset_mean_epe(const std::vector<double>& per_sample_epes) {
  if (per_sample_epes.empty())
    throw MetricError("dataset_mean_epe: empty sample list");
  double sum = 0.0;
  for (double e : per_sample_epes) sum += e;
  return sum / static_cast<double>(per_sample_epes.size());
}

MetricSummary summarize(const std::vector<SampleEpe>& per_sample,
                        SampleWeighting weighting) {
  if (per_sample.empty()) throw MetricError("summarize: empty sample list");
  MetricSummary s;
  s.per_sample = per_sample;
  s.n_samples = static_cast<int>(per_sample.size());
  double num = 0.0, den = 0.0;
  for (const SampleEpe& e : per_sample) {
    s.n_pixels += e.n_pixels;
    const double w = weighting == SampleWeighting::PerSample
                         ? 1.0
                         : static_cast<double>(e.n_pixels);
    num += w * e.epe;
    den += w;
  }
  if (den == 0.0) throw MetricError("summarize: zero total weight");
  s.mean_epe = num / den;
  return s;
}

double mc_epe(const std::map<CorruptionKind, double>& per_corruption_means) {
  double sum = 0.0;
  int n = 0;
  for (CorruptionKind kind : all_corruption_kinds()) {
    auto it = per_corruption_means.find(kind);
    if (it == per_corruption_means.end())
      throw MetricError("mc_epe: missing corruption kind '" +
                        to_string(kind) + "'");
    sum += it->second;
    ++n;
  }
  return sum / static_cast<double>(n);
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw MetricError("pearson: length mismatch");
  const size_t n = xs.size();
  if (n < 2) throw MetricError("pearson: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (size_t k = 0; k < n; ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t k = 0; k < n; ++k) {
    const double dx = xs[k] - mx, dy = ys[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw MetricError("pearson: zero variance input");
  // rounding can push |r| an ulp past 1 for perfectly collinear inputs
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace disprobe
