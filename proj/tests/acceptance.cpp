// Acceptance gate: one check per release criterion, each printing a single
// PASS/FAIL line. Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "disprobe/attacks.hpp"
#include "disprobe/corruption.hpp"
#include "disprobe/evaluate.hpp"
#include "disprobe/jpeg_codec.hpp"
#include "disprobe/metrics.hpp"
#include "disprobe/pfm.hpp"
#include "disprobe/png_io.hpp"
#include "disprobe/report.hpp"
#include "disprobe/stereo_model.hpp"
#include "disprobe/tape.hpp"
#include "disprobe/threat.hpp"
#include "jpeg_oracle.hpp"
#include "test_util.hpp"

using namespace disprobe;
using diff::Tape;
using diff::Tensor;
using diff::Var;
using disprobe::testutil::TempDir;

namespace {

struct Criterion {
  int number;
  std::string label;
  std::function<bool(std::string&)> run;
};

std::string params_path() {
  return std::string(DISPROBE_SOURCE_DIR) + "/data/corruption_params.conf";
}

double interior_epe(const DisparityMap& pred, const DisparityMap& ref,
                    int margin_x, int margin_y) {
  double sum = 0.0;
  long n = 0;
  for (int i = margin_y; i < pred.height - margin_y; ++i)
    for (int j = margin_x; j < pred.width - margin_x; ++j) {
      sum += std::abs(pred.at(i, j) - ref.at(i, j));
      ++n;
    }
  return sum / static_cast<double>(n);
}

// ---- criterion 1: gradient soundness --------------------------------------

bool gradient_soundness(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  ModelConfig config;
  config.max_disparity = 8;
  config.feature_channels = 4;
  const StereoModel model(config);

  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const StereoSample s = testutil::make_shifted_pair(16, 32, 3, seed);
    // offset the reference so |pred - ref| stays away from the abs kink,
    // where finite differences are ill-conditioned
    DisparityMap ref = s.gt;
    for (double& v : ref.values) v += 10.0;
    // gradient through extract -> cost volume -> soft-argmin -> loss,
    // alternating which eye is differentiated
    const bool left_eye = seed % 2 == 1;
    const Tensor fixed =
        image_to_tensor(left_eye ? s.right : s.left);
    const Tensor input = image_to_tensor(left_eye ? s.left : s.right);
    const double err = diff::grad_check(
        [&](Tape& t, Var v) {
          const Var o = t.leaf(fixed, false);
          const Var fl = model.extract_features(t, left_eye ? v : o);
          const Var fr = model.extract_features(t, left_eye ? o : v);
          const Var disp =
              model.soft_argmin(t, model.build_cost_volume(t, fl, fr));
          return attack_loss(t, disp, ref, LossMode::Plain,
                             config.max_disparity);
        },
        input, 5e-5);
    worst = std::max(worst, err);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max rel err %.3g (limit 1e-4), %.1f s",
                worst, seconds);
  detail = buf;
  return worst < 1e-4 && seconds < 60.0;
}

// ---- criterion 2: oracle equivalence --------------------------------------

bool oracle_equivalence(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  ModelConfig config;
  config.max_disparity = 12;
  config.temperature = 0.01;
  const StereoModel model(config);

  double worst_oracle = 0.0, worst_model = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 8;
    const StereoSample s =
        testutil::make_shifted_pair(32, 64, d, 200 + trial);
    const DisparityMap oracle = block_matching_oracle(s, 12, 7);
    DisparityMap truth(s.gt.height, s.gt.width, static_cast<double>(d));
    worst_oracle =
        std::max(worst_oracle, interior_epe(oracle, truth, 16, 4));
    worst_model = std::max(worst_model,
                           interior_epe(model.predict(s), oracle, 16, 4));
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "oracle vs d* %.3f px (limit 0.2), model vs oracle %.3f px "
                "(limit 0.5), %.1f s",
                worst_oracle, worst_model, seconds);
  detail = buf;
  return worst_oracle < 0.2 && worst_model < 0.5 && seconds < 120.0;
}

// ---- criterion 3: budget soundness ----------------------------------------

bool budget_soundness(std::string& detail) {
  ModelConfig config;
  config.max_disparity = 8;
  config.feature_channels = 4;
  const StereoModel model(config);
  const StereoSample sample = testutil::make_shifted_pair(12, 20, 2, 9);

  long checked = 0, violations = 0;
  for (ThreatModel tm : {ThreatModel::FGSM, ThreatModel::BIM, ThreatModel::PGD,
                         ThreatModel::APGD, ThreatModel::CosPGD}) {
    for (LpNorm norm : {LpNorm::Linf, LpNorm::L2}) {
      if (tm == ThreatModel::APGD && norm == LpNorm::L2) continue;
      for (uint64_t seed = 0; seed < 20; ++seed) {
        AttackConfig c;
        c.threat_model = tm;
        c.iterations = 4;
        c.alpha = 0.01;
        c.lp_norm = norm;
        c.epsilon = norm == LpNorm::Linf ? 8.0 / 255.0 : 0.5;
        c.seed = seed;
        const AttackResult r = run_attack(model, sample, c);
        for (const IterStat& s : r.trace) {
          ++checked;
          const bool budget_ok =
              norm == LpNorm::Linf
                  ? s.linf_left <= c.epsilon && s.linf_right <= c.epsilon
                  : s.l2_left <= c.epsilon + 1e-9 &&
                        s.l2_right <= c.epsilon + 1e-9;
          if (!budget_ok || s.min_pixel < 0.0 || s.max_pixel > 1.0)
            ++violations;
        }
      }
    }
  }
  detail = std::to_string(checked) + " iterates checked, " +
           std::to_string(violations) + " violations";
  return violations == 0;
}

// ---- criterion 4: attack effectiveness ordering ---------------------------

bool attack_ordering(std::string& detail) {
  ModelConfig config;
  config.max_disparity = 8;
  config.feature_channels = 4;
  const StereoModel model(config);

  std::vector<StereoSample> samples;
  for (uint64_t seed = 1; seed <= 10; ++seed)
    samples.push_back(testutil::make_shifted_pair(16, 28, 3, 300 + seed));

  auto mean_epe_for = [&](ThreatModel tm, uint64_t seed) {
    std::vector<double> epes;
    for (const StereoSample& s : samples) {
      AttackConfig c;
      c.threat_model = tm;
      c.iterations = tm == ThreatModel::FGSM ? 1 : 20;
      c.alpha = 0.01;
      c.epsilon = 8.0 / 255.0;
      c.seed = seed;
      const AttackResult r = run_attack(model, s, c);
      epes.push_back(epe(model.predict(r.adversarial), s.gt));
    }
    return dataset_mean_epe(epes);
  };

  std::vector<double> clean_epes;
  for (const StereoSample& s : samples)
    clean_epes.push_back(epe(model.predict(s), s.gt));
  const double clean = dataset_mean_epe(clean_epes);
  const double fgsm_epe = mean_epe_for(ThreatModel::FGSM, 0);

  const std::vector<uint64_t> seeds = {11, 22, 33, 44, 55};
  bool medians_ok = true;
  int iterative_wins = 0, iterative_total = 0;
  for (ThreatModel tm : {ThreatModel::BIM, ThreatModel::PGD, ThreatModel::APGD,
                         ThreatModel::CosPGD}) {
    std::vector<double> per_seed;
    for (uint64_t seed : seeds) {
      const double e = mean_epe_for(tm, seed);
      per_seed.push_back(e);
      ++iterative_total;
      if (e >= fgsm_epe) ++iterative_wins;
    }
    std::sort(per_seed.begin(), per_seed.end());
    const double median = per_seed[per_seed.size() / 2];
    if (fgsm_epe > median) medians_ok = false;
  }
  const double win_rate =
      static_cast<double>(iterative_wins) / iterative_total;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "clean %.3f, FGSM %.3f, iterative>=FGSM in %.0f%% of seeds",
                clean, fgsm_epe, 100.0 * win_rate);
  detail = buf;
  return clean < fgsm_epe && medians_ok && win_rate >= 0.9;
}

// ---- criterion 5: corruption severity monotonicity ------------------------

bool severity_monotonicity(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  const CorruptionParams params = CorruptionParams::load(params_path());

  std::vector<ImageBuffer> images;
  for (uint64_t seed = 1; seed <= 20; ++seed)
    images.push_back(testutil::make_texture(48, 48, 3, 400 + seed));

  std::string offender;
  for (CorruptionKind kind : all_corruption_kinds()) {
    double prev = 1e18;
    for (int severity = 1; severity <= 5; ++severity) {
      double mean_psnr = 0.0;
      for (size_t i = 0; i < images.size(); ++i) {
        const CorruptionSpec spec{kind, severity, 500 + i};
        mean_psnr += testutil::psnr(
            images[i], apply_corruption(images[i], spec, params));
      }
      mean_psnr /= static_cast<double>(images.size());
      if (mean_psnr >= prev && offender.empty())
        offender = to_string(kind) + "@" + std::to_string(severity);
      prev = mean_psnr;
    }
  }

  // noise family must also degrade the model at severity 5 vs 1
  ModelConfig config;
  config.max_disparity = 8;
  config.feature_channels = 4;
  const StereoModel model(config);
  std::vector<StereoSample> samples;
  for (uint64_t seed = 1; seed <= 5; ++seed)
    samples.push_back(testutil::make_shifted_pair(20, 36, 3, 600 + seed));

  bool noise_ok = true;
  for (CorruptionKind kind :
       {CorruptionKind::GaussianNoise, CorruptionKind::ShotNoise,
        CorruptionKind::ImpulseNoise}) {
    auto mean_at = [&](int severity) {
      std::vector<double> epes;
      for (const StereoSample& s : samples) {
        const StereoSample c =
            corrupt_stereo_pair(s, {kind, severity, 7}, params);
        epes.push_back(epe(model.predict(c), s.gt));
      }
      return dataset_mean_epe(epes);
    };
    if (mean_at(5) < mean_at(1)) noise_ok = false;
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  detail = offender.empty()
               ? "PSNR strictly decreasing for all 15 kinds"
               : "PSNR not decreasing at " + offender;
  detail += noise_ok ? "; noise-family EPE rises" : "; noise-family EPE flat";
  detail += ", " + std::to_string(static_cast<int>(seconds)) + " s";
  return offender.empty() && noise_ok && seconds < 600.0;
}

// ---- shared fixture for criteria 6/7/9 ------------------------------------

struct BenchFixture {
  TempDir tmp{"acceptance"};
  std::string dataset;
  EvalOptions options;

  BenchFixture() {
    std::ofstream manifest(tmp.path("set.manifest"));
    for (int i = 0; i < 4; ++i) {
      const StereoSample s =
          testutil::make_shifted_pair(16, 24, 2 + i % 3, 700 + i);
      const std::string prefix = tmp.path("s" + std::to_string(i));
      write_file(prefix + "_l.pfm", write_pfm(PfmData::from_image(s.left)));
      write_file(prefix + "_r.pfm", write_pfm(PfmData::from_image(s.right)));
      write_file(prefix + "_gt.pfm",
                 write_pfm(PfmData::from_disparity(s.gt)));
      manifest << prefix << "_l.pfm," << prefix << "_r.pfm," << prefix
               << "_gt.pfm,pfm\n";
    }
    dataset = tmp.path("set.manifest");
    options.cache_dir = tmp.path("cache");
    options.params_path = params_path();
    options.jobs = 4;
  }

  EvalRequest corruption_request(int severity) const {
    EvalRequest r;
    r.model_name = "refnet-small";
    r.dataset = dataset;
    r.threat = parse_threat_text(
        "threat_model: 2DCommonCorruption\nseverity: " +
        std::to_string(severity) + "\n");
    r.seed = 5;
    return r;
  }
};

bool aggregation_identity(BenchFixture& fx, std::string& detail) {
  const EvalRecord record = evaluate(fx.corruption_request(2), fx.options);
  if (record.summaries.size() != 15) {
    detail = "expected 15 per-kind summaries, got " +
             std::to_string(record.summaries.size());
    return false;
  }
  std::map<CorruptionKind, double> means;
  for (const auto& [kind, summary] : record.summaries)
    means[parse_corruption_kind(kind)] = summary.mean_epe;
  const double recomputed = mc_epe(means);
  const double diff = std::abs(record.mc_epe - recomputed);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "|stored - recomputed| = %.3g", diff);
  detail = buf;
  return diff <= 1e-12;
}

bool cache_determinism(BenchFixture& fx, std::string& detail) {
  EvalRequest request = fx.corruption_request(1);
  const EvalRecord first = evaluate(request, fx.options);

  request.retrieve_existing = true;
  const EvalRecord cached = evaluate(request, fx.options);
  const bool hit_identical =
      record_to_json(cached) == record_to_json(first);

  request.retrieve_existing = false;
  const EvalRecord fresh = evaluate(request, fx.options);
  auto metrics_json = [](EvalRecord r) {
    r.created_at.clear();
    r.runtime_seconds = 0.0;
    return record_to_json(r);
  };
  const bool recompute_identical =
      metrics_json(fresh) == metrics_json(first);

  // perturbing any fingerprint input must miss
  const ResultCache cache(fx.options.cache_dir);
  const CorruptionParams params =
      CorruptionParams::load(fx.options.params_path);
  bool all_miss = true;
  std::vector<EvalRequest> perturbed;
  perturbed.push_back(request);
  perturbed.back().model_name = "refnet";
  perturbed.push_back(request);
  perturbed.back().dataset = request.dataset + ".other";
  perturbed.push_back(request);
  perturbed.back().threat.severity = 4;
  perturbed.push_back(request);
  perturbed.back().seed = 99;
  for (const EvalRequest& r : perturbed)
    if (cache.lookup(request_fingerprint(r, params.file_hash())).has_value())
      all_miss = false;
  if (cache.lookup(request_fingerprint(request, "other-params")).has_value())
    all_miss = false;

  detail = std::string("cache hit ") +
           (hit_identical ? "identical" : "DIFFERS") + ", recompute " +
           (recompute_identical ? "identical" : "DIFFERS") + ", perturbed " +
           (all_miss ? "all miss" : "HIT");
  return hit_identical && recompute_identical && all_miss;
}

// ---- criterion 8: format fidelity -----------------------------------------

bool format_fidelity(std::string& detail) {
  RngStream rng(8);

  // PFM: 100 random maps, byte-exact round trips
  bool pfm_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    PfmData p;
    p.height = 2 + static_cast<int>(rng.next_below(12));
    p.width = 2 + static_cast<int>(rng.next_below(12));
    p.channels = rng.next_below(2) ? 3 : 1;
    p.data.resize(static_cast<size_t>(p.height) * p.width * p.channels);
    for (float& v : p.data)
      v = static_cast<float>(rng.uniform(-500.0, 500.0));
    const std::vector<uint8_t> bytes = write_pfm(p);
    if (write_pfm(parse_pfm(bytes)) != bytes) pfm_ok = false;
  }

  // KITTI: decode is exactly code/256 with 0 = invalid
  bool kitti_ok = true;
  DisparityMap map(4, 5);
  for (size_t k = 0; k < map.values.size(); ++k)
    map.values[k] = static_cast<double>(rng.next_below(65000) + 1) / 256.0;
  map.valid[3] = 0;
  const DisparityMap decoded = parse_kitti_disparity(write_kitti_disparity(map));
  for (size_t k = 0; k < map.values.size(); ++k) {
    if (k == 3) {
      if (decoded.valid[k]) kitti_ok = false;
    } else if (decoded.values[k] != map.values[k] || !decoded.valid[k]) {
      kitti_ok = false;
    }
  }

  // JPEG: quality-100 roundtrip within 2/255 of libjpeg on 5 images
  double worst_jpeg = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const ImageBuffer img = testutil::make_texture(24, 40, 3, 800 + seed, 2.0);
    const std::vector<uint8_t> bytes = encode_jpeg(img, 100);
    const ImageBuffer ours = decode_jpeg(bytes);
    const ImageBuffer theirs = testutil::libjpeg_decode(bytes);
    for (size_t k = 0; k < ours.data.size(); ++k)
      worst_jpeg =
          std::max(worst_jpeg, std::abs(ours.data[k] - theirs.data[k]));
  }
  const bool jpeg_ok = worst_jpeg <= 2.0 / 255.0;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "pfm %s, kitti %s, jpeg max dev %.2f/255 (limit 2)",
                pfm_ok ? "byte-exact" : "MISMATCH",
                kitti_ok ? "exact" : "MISMATCH", worst_jpeg * 255.0);
  detail = buf;
  return pfm_ok && kitti_ok && jpeg_ok;
}

// ---- criterion 9: correlation op ------------------------------------------

bool correlation_op(BenchFixture& fx, std::string& detail) {
  // reference identities
  const std::vector<double> x = {1.0, 2.0, 5.0, 9.0};
  std::vector<double> y = x;
  bool identities = std::abs(pearson(x, y) - 1.0) < 1e-12;
  for (double& v : y) v = -v;
  identities = identities && std::abs(pearson(x, y) + 1.0) < 1e-12;

  // 100 random pairs vs a direct raw-moment evaluation
  RngStream rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(30), b(30);
    for (size_t k = 0; k < a.size(); ++k) {
      a[k] = rng.next_gaussian();
      b[k] = 0.5 * a[k] + rng.next_gaussian();
    }
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (size_t k = 0; k < a.size(); ++k) {
      sa += a[k];
      sb += b[k];
      saa += a[k] * a[k];
      sbb += b[k] * b[k];
      sab += a[k] * b[k];
    }
    const double direct = (n * sab - sa * sb) /
                          std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
    worst = std::max(worst, std::abs(pearson(a, b) - direct));
  }

  // end-to-end scatter pipeline from two evaluation records
  EvalRequest clean_req;
  clean_req.model_name = "refnet-small";
  clean_req.dataset = fx.dataset;
  const EvalRecord a = evaluate(clean_req, fx.options);
  const EvalRecord b = evaluate(fx.corruption_request(3), fx.options);
  const CorrelationResult scatter = correlate_records(a, b);
  const std::string out = fx.tmp.path("scatter.csv");
  emit_scatter_csv(scatter, out);
  const bool pipeline_ok = scatter.points.size() == 4 &&
                           std::ifstream(out).good() &&
                           std::isfinite(scatter.r);

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "identities %s, max dev vs direct %.3g (limit 1e-12), "
                "scatter r=%.3f over %zu samples",
                identities ? "ok" : "BROKEN", worst, scatter.r,
                scatter.points.size());
  detail = buf;
  return identities && worst <= 1e-12 && pipeline_ok;
}

}  // namespace

int main() {
  BenchFixture fx;
  const std::vector<Criterion> criteria = {
      {1, "gradient soundness", gradient_soundness},
      {2, "oracle equivalence", oracle_equivalence},
      {3, "budget soundness", budget_soundness},
      {4, "attack effectiveness ordering", attack_ordering},
      {5, "corruption severity monotonicity", severity_monotonicity},
      {6, "aggregation identity",
       [&](std::string& d) { return aggregation_identity(fx, d); }},
      {7, "cache determinism",
       [&](std::string& d) { return cache_determinism(fx, d); }},
      {8, "format fidelity", format_fidelity},
      {9, "correlation op",
       [&](std::string& d) { return correlation_op(fx, d); }},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::printf("criterion %d (%s): %s — %s\n", c.number, c.label.c_str(),
                ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
