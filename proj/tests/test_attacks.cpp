#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "disprobe/attacks.hpp"
#include "disprobe/errors.hpp"
#include "disprobe/metrics.hpp"
#include "test_util.hpp"

using namespace disprobe;

namespace {

const StereoModel& model() {
  static ModelConfig config = [] {
    ModelConfig c;
    c.max_disparity = 8;
    c.feature_channels = 4;
    return c;
  }();
  static const StereoModel m(config);
  return m;
}

StereoSample sample(uint64_t seed = 1) {
  return testutil::make_shifted_pair(16, 28, 3, seed);
}

AttackConfig config_for(ThreatModel tm, int iterations = 5) {
  AttackConfig c;
  c.threat_model = tm;
  c.iterations = iterations;
  c.alpha = 0.01;
  c.epsilon = 8.0 / 255.0;
  c.seed = 42;
  return c;
}

void check_budget(const AttackResult& r, const AttackConfig& c) {
  for (const IterStat& s : r.trace) {
    if (c.lp_norm == LpNorm::Linf) {
      CHECK(s.linf_left <= c.epsilon);
      CHECK(s.linf_right <= c.epsilon);
    } else {
      CHECK(s.l2_left <= c.epsilon + 1e-9);
      CHECK(s.l2_right <= c.epsilon + 1e-9);
    }
    CHECK(s.min_pixel >= 0.0);
    CHECK(s.max_pixel <= 1.0);
  }
}

}  // namespace

TEST_CASE("projection clamps Linf and rescales L2") {
  ImageBuffer d(1, 1, 2);
  d.data = {0.2, -0.3};
  project_lp(d, 0.1, LpNorm::Linf);
  CHECK(d.data[0] == doctest::Approx(0.1));
  CHECK(d.data[1] == doctest::Approx(-0.1));

  ImageBuffer e(1, 1, 2);
  e.data = {3.0, 4.0};
  project_lp(e, 1.0, LpNorm::L2);
  CHECK(e.data[0] == doctest::Approx(0.6));
  CHECK(e.data[1] == doctest::Approx(0.8));

  ImageBuffer f(1, 1, 2);
  f.data = {0.05, -0.02};
  const std::vector<double> before = f.data;
  project_lp(f, 0.1, LpNorm::Linf);
  CHECK(f.data == before);
  project_lp(f, 1.0, LpNorm::L2);
  CHECK(f.data == before);
}

TEST_CASE("clip_valid clamps into the unit range") {
  ImageBuffer clean(1, 1, 3);
  clean.data = {0.95, 0.5, 0.05};
  ImageBuffer delta(1, 1, 3);
  delta.data = {0.1, -0.1, -0.1};
  const ImageBuffer out = clip_valid(clean, delta);
  CHECK(out.data[0] == doctest::Approx(1.0));
  CHECK(out.data[1] == doctest::Approx(0.4));
  CHECK(out.data[2] == doctest::Approx(0.0));
}

TEST_CASE("config validation") {
  AttackConfig c = config_for(ThreatModel::PGD);
  CHECK_NOTHROW(c.validate());
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = config_for(ThreatModel::APGD);
  c.lp_norm = LpNorm::L2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(apgd(model(), sample(), c), ConfigError);
}

TEST_CASE("threat model parsing round trips") {
  for (ThreatModel tm : {ThreatModel::FGSM, ThreatModel::BIM, ThreatModel::PGD,
                         ThreatModel::APGD, ThreatModel::CosPGD})
    CHECK(parse_threat_model(to_string(tm)) == tm);
  CHECK_THROWS_AS(parse_threat_model("DeepFool"), ConfigError);
  CHECK(parse_lp_norm("L2") == LpNorm::L2);
  CHECK_THROWS_AS(parse_lp_norm("L1"), ConfigError);
}

TEST_CASE("fgsm increases the loss and respects min(alpha, epsilon)") {
  const AttackConfig c = config_for(ThreatModel::FGSM, 1);
  const AttackResult r = fgsm(model(), sample(), c);
  CHECK(r.final_loss >= r.trace.front().loss - 1e-9);
  const double bound = std::min(c.alpha, c.epsilon) + 1e-12;
  CHECK(r.trace.back().linf_left <= bound);
  CHECK(r.trace.back().linf_right <= bound);
  check_budget(r, c);
}

TEST_CASE("fgsm equals bim with one iteration exactly") {
  AttackConfig cf = config_for(ThreatModel::FGSM, 1);
  const AttackResult a = fgsm(model(), sample(), cf);
  AttackConfig cb = cf;
  cb.threat_model = ThreatModel::BIM;
  const AttackResult b = bim(model(), sample(), cb);
  CHECK(a.perturbation.delta_left.data == b.perturbation.delta_left.data);
  CHECK(a.perturbation.delta_right.data == b.perturbation.delta_right.data);
  CHECK(a.final_loss == b.final_loss);
}

TEST_CASE("attacks are deterministic in the seed") {
  for (ThreatModel tm : {ThreatModel::PGD, ThreatModel::APGD,
                         ThreatModel::CosPGD}) {
    const AttackConfig c = config_for(tm, 3);
    const AttackResult a = run_attack(model(), sample(), c);
    const AttackResult b = run_attack(model(), sample(), c);
    CHECK(a.perturbation.delta_left.data == b.perturbation.delta_left.data);
    CHECK(a.final_loss == b.final_loss);
    AttackConfig c2 = c;
    c2.seed = 43;
    const AttackResult d = run_attack(model(), sample(), c2);
    CHECK(a.perturbation.delta_left.data != d.perturbation.delta_left.data);
  }
}

TEST_CASE("every attack honors budget and validity at every iterate") {
  for (ThreatModel tm : {ThreatModel::FGSM, ThreatModel::BIM, ThreatModel::PGD,
                         ThreatModel::APGD, ThreatModel::CosPGD}) {
    for (LpNorm norm : {LpNorm::Linf, LpNorm::L2}) {
      if (tm == ThreatModel::APGD && norm == LpNorm::L2) continue;
      AttackConfig c = config_for(tm, 4);
      c.lp_norm = norm;
      if (norm == LpNorm::L2) c.epsilon = 1.0;
      const AttackResult r = run_attack(model(), sample(), c);
      check_budget(r, c);
    }
  }
}

TEST_CASE("apgd returns its best iterate") {
  const AttackConfig c = config_for(ThreatModel::APGD, 10);
  const AttackResult r = apgd(model(), sample(), c);
  for (const IterStat& s : r.trace) CHECK(r.final_loss >= s.loss - 1e-12);
  check_budget(r, c);
}

TEST_CASE("iterative attacks degrade EPE at least as much as clean") {
  for (ThreatModel tm : {ThreatModel::BIM, ThreatModel::PGD,
                         ThreatModel::APGD, ThreatModel::CosPGD}) {
    const AttackConfig c = config_for(tm, 10);
    const StereoSample s = sample(2);
    const AttackResult r = run_attack(model(), s, c);
    const double clean = epe(model().predict(s), s.gt);
    const double adv = epe(model().predict(r.adversarial), s.gt);
    CHECK(adv >= clean);
  }
}

TEST_CASE("targeting the clean prediction keeps the loss at zero") {
  const StereoSample s = sample(3);
  AttackConfig c = config_for(ThreatModel::BIM, 3);
  c.target = TargetMode::Explicit;
  c.explicit_target = model().predict(s);
  const AttackResult r = bim(model(), s, c);
  CHECK(r.trace.front().loss == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.final_loss <= 1e-6);
}

TEST_CASE("targeted zero-disparity attack pulls predictions down") {
  const StereoSample s = sample(4);
  AttackConfig c = config_for(ThreatModel::BIM, 10);
  c.target = TargetMode::Zero;
  const AttackResult r = bim(model(), s, c);
  // descending the loss toward the zero map must not increase it
  CHECK(r.final_loss <= r.trace.front().loss + 1e-9);
}

TEST_CASE("single-eye attacks leave the other eye untouched") {
  AttackConfig c = config_for(ThreatModel::BIM, 3);
  c.eyes = AttackEyes::LeftOnly;
  const AttackResult r = bim(model(), sample(5), c);
  for (double v : r.perturbation.delta_right.data) CHECK(v == 0.0);
  double moved = 0.0;
  for (double v : r.perturbation.delta_left.data) moved += std::abs(v);
  CHECK(moved > 0.0);
}
