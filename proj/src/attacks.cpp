#include "disprobe/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "disprobe/errors.hpp"
#include "disprobe/rng.hpp"

namespace disprobe {

ThreatModel parse_threat_model(const std::string& name) {
  if (name == "FGSM") return ThreatModel::FGSM;
  if (name == "BIM") return ThreatModel::BIM;
  if (name == "PGD") return ThreatModel::PGD;
  if (name == "APGD") return ThreatModel::APGD;
  if (name == "CosPGD") return ThreatModel::CosPGD;
  throw ConfigError("unknown threat_model '" + name + "'");
}

std::string to_string(ThreatModel model) {
  switch (model) {
    case ThreatModel::FGSM: return "FGSM";
    case ThreatModel::BIM: return "BIM";
    case ThreatModel::PGD: return "PGD";
    case ThreatModel::APGD: return "APGD";
    case ThreatModel::CosPGD: return "CosPGD";
  }
  throw ConfigError("invalid threat model");
}

LpNorm parse_lp_norm(const std::string& name) {
  if (name == "Linf") return LpNorm::Linf;
  if (name == "L2") return LpNorm::L2;
  throw ConfigError("unknown lp_norm '" + name + "' (options are Linf and L2)");
}

std::string to_string(LpNorm norm) {
  return norm == LpNorm::Linf ? "Linf" : "L2";
}

void AttackConfig::validate() const {
  if (iterations < 1) throw ConfigError("attack iterations must be >= 1");
  if (alpha <= 0.0) throw ConfigError("attack alpha must be > 0");
  if (epsilon <= 0.0) throw ConfigError("attack epsilon must be > 0");
  if (threat_model == ThreatModel::APGD && lp_norm == LpNorm::L2)
    throw ConfigError("APGD supports only the Linf norm");
  if (target == TargetMode::Explicit &&
      (explicit_target.height == 0 || explicit_target.width == 0))
    throw ConfigError("explicit attack target is empty");
}

void project_lp(ImageBuffer& delta, double epsilon, LpNorm norm) {
  if (epsilon <= 0.0) throw ConfigError("projection epsilon must be > 0");
  if (norm == LpNorm::Linf) {
    for (double& v : delta.data) v = std::clamp(v, -epsilon, epsilon);
  } else {
    double sumsq = 0.0;
    for (double v : delta.data) sumsq += v * v;
    const double n = std::sqrt(sumsq);
    if (n > epsilon) {
      const double s = epsilon / n;
      for (double& v : delta.data) v *= s;
    }
  }
}

ImageBuffer clip_valid(const ImageBuffer& clean, const ImageBuffer& delta) {
  if (!clean.same_shape(delta))
    throw ShapeError("clip_valid: shape mismatch");
  ImageBuffer out = clean;
  for (size_t k = 0; k < out.data.size(); ++k)
    out.data[k] = std::clamp(clean.data[k] + delta.data[k], 0.0, 1.0);
  return out;
}

namespace {

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void signed_step(ImageBuffer& delta, const ImageBuffer& grad, double step) {
  for (size_t k = 0; k < delta.data.size(); ++k)
    delta.data[k] += step * sign0(grad.data[k]);
}

// re-projects delta into the budget and the valid image range, keeping
// delta = adversarial - clean so both invariants hold simultaneously
void reproject(const ImageBuffer& clean, ImageBuffer& delta, double epsilon,
               LpNorm norm) {
  project_lp(delta, epsilon, norm);
  const ImageBuffer adv = clip_valid(clean, delta);
  for (size_t k = 0; k < delta.data.size(); ++k)
    delta.data[k] = adv.data[k] - clean.data[k];
  // the round trip through clean can grow |delta| by an ulp; shrinking it
  // back keeps clean + delta between clean and the clipped point, so the
  // image stays valid
  project_lp(delta, epsilon, norm);
}

void norm_stats(const ImageBuffer& delta, double& linf, double& l2) {
  linf = 0.0;
  double sumsq = 0.0;
  for (double v : delta.data) {
    linf = std::max(linf, std::abs(v));
    sumsq += v * v;
  }
  l2 = std::sqrt(sumsq);
}

IterStat make_stat(const StereoSample& adv, const Perturbation& pert,
                   double loss) {
  IterStat s;
  s.loss = loss;
  norm_stats(pert.delta_left, s.linf_left, s.l2_left);
  norm_stats(pert.delta_right, s.linf_right, s.l2_right);
  double lo = 1.0, hi = 0.0;
  for (double v : adv.left.data) { lo = std::min(lo, v); hi = std::max(hi, v); }
  for (double v : adv.right.data) { lo = std::min(lo, v); hi = std::max(hi, v); }
  s.min_pixel = lo;
  s.max_pixel = hi;
  return s;
}

DisparityMap make_reference(const StereoSample& sample,
                            const AttackConfig& config) {
  switch (config.target) {
    case TargetMode::None:
      return sample.gt;
    case TargetMode::Zero:
      return DisparityMap(sample.left.height, sample.left.width, 0.0, true);
    case TargetMode::Explicit:
      if (config.explicit_target.height != sample.left.height ||
          config.explicit_target.width != sample.left.width)
        throw ShapeError("explicit attack target shape mismatch");
      return config.explicit_target;
  }
  throw ConfigError("invalid target mode");
}

double plain_loss(const DisparityMap& pred, const DisparityMap& reference) {
  double sum = 0.0;
  size_t n = 0;
  for (size_t k = 0; k < reference.values.size(); ++k) {
    if (!reference.valid[k]) continue;
    sum += std::abs(pred.values[k] - reference.values[k]);
    ++n;
  }
  if (n == 0) throw MetricError("attack reference has no valid pixels");
  return sum / static_cast<double>(n);
}

ImageBuffer random_uniform_delta(const ImageBuffer& like, double epsilon,
                                 RngStream rng) {
  ImageBuffer delta(like.height, like.width, like.channels);
  for (double& v : delta.data) v = rng.uniform(-epsilon, epsilon);
  return delta;
}

struct AttackState {
  const StereoModel& model;
  const StereoSample& clean;
  AttackConfig config;
  DisparityMap reference;
  LossMode mode;
  double direction;  // +1 ascend (non-targeted), -1 descend (targeted)
  AttackResult result;

  AttackState(const StereoModel& m, const StereoSample& s,
              const AttackConfig& c, LossMode loss_mode)
      : model(m), clean(s), config(c), reference(make_reference(s, c)),
        mode(loss_mode),
        direction(c.target == TargetMode::None ? 1.0 : -1.0) {
    s.check_consistent();
    config.validate();
    result.clean_loss = plain_loss(m.predict(s), reference);
  }

  StereoSample adversarial(const Perturbation& pert) const {
    StereoSample adv;
    adv.left = clip_valid(clean.left, pert.delta_left);
    adv.right = clip_valid(clean.right, pert.delta_right);
    adv.gt = clean.gt;
    adv.id = clean.id;
    return adv;
  }

  // gradient + loss at the current iterate; the unattacked eye's gradient
  // is zeroed so the step leaves it untouched
  GradResult eval(const StereoSample& adv) const {
    GradResult g = model.input_gradient(adv, mode, reference);
    if (config.eyes == AttackEyes::LeftOnly)
      std::fill(g.grad_right.data.begin(), g.grad_right.data.end(), 0.0);
    else if (config.eyes == AttackEyes::RightOnly)
      std::fill(g.grad_left.data.begin(), g.grad_left.data.end(), 0.0);
    return g;
  }

  void step(Perturbation& pert, const GradResult& g) const {
    const double step_size = direction * config.alpha;
    signed_step(pert.delta_left, g.grad_left, step_size);
    signed_step(pert.delta_right, g.grad_right, step_size);
    reproject(clean.left, pert.delta_left, config.epsilon, config.lp_norm);
    reproject(clean.right, pert.delta_right, config.epsilon, config.lp_norm);
  }

  Perturbation zero_start() const {
    Perturbation p;
    p.delta_left = ImageBuffer(clean.left.height, clean.left.width,
                               clean.left.channels);
    p.delta_right = ImageBuffer(clean.right.height, clean.right.width,
                                clean.right.channels);
    return p;
  }

  Perturbation random_start() const {
    RngStream rng(config.seed);
    Perturbation p;
    p.delta_left = random_uniform_delta(clean.left, config.epsilon,
                                        rng.substream("left"));
    p.delta_right = random_uniform_delta(clean.right, config.epsilon,
                                         rng.substream("right"));
    reproject(clean.left, p.delta_left, config.epsilon, config.lp_norm);
    reproject(clean.right, p.delta_right, config.epsilon, config.lp_norm);
    return p;
  }

  void finish(Perturbation pert, double final_loss) {
    result.adversarial = adversarial(pert);
    result.perturbation = std::move(pert);
    result.final_loss = final_loss;
  }
};

// FGSM / BIM / PGD / CosPGD all share this loop; they differ only in the
// starting point, iteration count, and loss mode.
void basic_loop(AttackState& st, Perturbation pert, int iterations) {
  StereoSample adv = st.adversarial(pert);
  for (int t = 0; t < iterations; ++t) {
    GradResult g = st.eval(adv);
    st.result.trace.push_back(make_stat(adv, pert, g.loss));
    st.step(pert, g);
    adv = st.adversarial(pert);
  }
  const GradResult g = st.eval(adv);
  st.result.trace.push_back(make_stat(adv, pert, g.loss));
  st.finish(std::move(pert), g.loss);
}

void apgd_loop(AttackState& st) {
  const int T = st.config.iterations;
  std::vector<int> checkpoints;
  for (double f : {0.22, 0.47, 0.69, 0.85, 1.0})
    checkpoints.push_back(static_cast<int>(std::ceil(f * T)));

  Perturbation pert = st.random_start();
  StereoSample adv = st.adversarial(pert);
  GradResult g = st.eval(adv);
  st.result.trace.push_back(make_stat(adv, pert, g.loss));

  // the attack maximizes score; targeted attacks minimize the loss
  auto score_of = [&](double loss) { return st.direction * loss; };
  double score = score_of(g.loss);
  Perturbation best = pert;
  double best_score = score;
  double best_loss = g.loss;

  double alpha = st.config.alpha;
  Perturbation prev = pert;  // x_{t-1} for the momentum term
  int improved = 0;
  int since_checkpoint = 0;
  size_t next_cp = 0;

  for (int t = 1; t <= T; ++t) {
    // plain signed step z, then momentum blend with the previous iterate
    Perturbation z = pert;
    const double step_size = st.direction * alpha;
    signed_step(z.delta_left, g.grad_left, step_size);
    signed_step(z.delta_right, g.grad_right, step_size);
    reproject(st.clean.left, z.delta_left, st.config.epsilon,
              st.config.lp_norm);
    reproject(st.clean.right, z.delta_right, st.config.epsilon,
              st.config.lp_norm);

    Perturbation next = pert;
    auto blend = [](ImageBuffer& out, const ImageBuffer& x,
                    const ImageBuffer& z_eye, const ImageBuffer& x_prev) {
      for (size_t k = 0; k < out.data.size(); ++k)
        out.data[k] = x.data[k] + 0.75 * (z_eye.data[k] - x.data[k]) +
                      0.25 * (x.data[k] - x_prev.data[k]);
    };
    blend(next.delta_left, pert.delta_left, z.delta_left, prev.delta_left);
    blend(next.delta_right, pert.delta_right, z.delta_right, prev.delta_right);
    reproject(st.clean.left, next.delta_left, st.config.epsilon,
              st.config.lp_norm);
    reproject(st.clean.right, next.delta_right, st.config.epsilon,
              st.config.lp_norm);

    prev = std::move(pert);
    pert = std::move(next);
    adv = st.adversarial(pert);
    g = st.eval(adv);
    st.result.trace.push_back(make_stat(adv, pert, g.loss));

    const double new_score = score_of(g.loss);
    if (new_score > score) ++improved;
    score = new_score;
    if (new_score > best_score) {
      best_score = new_score;
      best_loss = g.loss;
      best = pert;
    }
    ++since_checkpoint;

    if (next_cp < checkpoints.size() && t == checkpoints[next_cp]) {
      if (improved < 0.75 * since_checkpoint) {
        alpha *= 0.5;
        pert = best;
        prev = best;
        adv = st.adversarial(pert);
        g = st.eval(adv);
        score = best_score;
      }
      improved = 0;
      since_checkpoint = 0;
      ++next_cp;
    }
  }

  st.finish(std::move(best), best_loss);
}

}  // namespace

AttackResult fgsm(const StereoModel& model, const StereoSample& sample,
                  const AttackConfig& config) {
  if (config.threat_model != ThreatModel::FGSM)
    throw ConfigError("fgsm called with a non-FGSM config");
  AttackState st(model, sample, config, LossMode::Plain);
  basic_loop(st, st.zero_start(), 1);  // FGSM is single-step by definition
  return std::move(st.result);
}

AttackResult bim(const StereoModel& model, const StereoSample& sample,
                 const AttackConfig& config) {
  if (config.threat_model != ThreatModel::BIM)
    throw ConfigError("bim called with a non-BIM config");
  AttackState st(model, sample, config, LossMode::Plain);
  basic_loop(st, st.zero_start(), st.config.iterations);
  return std::move(st.result);
}

AttackResult pgd(const StereoModel& model, const StereoSample& sample,
                 const AttackConfig& config) {
  if (config.threat_model != ThreatModel::PGD)
    throw ConfigError("pgd called with a non-PGD config");
  AttackState st(model, sample, config, LossMode::Plain);
  basic_loop(st, st.random_start(), st.config.iterations);
  return std::move(st.result);
}

AttackResult apgd(const StereoModel& model, const StereoSample& sample,
                  const AttackConfig& config) {
  if (config.threat_model != ThreatModel::APGD)
    throw ConfigError("apgd called with a non-APGD config");
  AttackState st(model, sample, config, LossMode::Plain);
  apgd_loop(st);
  return std::move(st.result);
}

AttackResult cospgd(const StereoModel& model, const StereoSample& sample,
                    const AttackConfig& config) {
  if (config.threat_model != ThreatModel::CosPGD)
    throw ConfigError("cospgd called with a non-CosPGD config");
  AttackState st(model, sample, config, LossMode::CosineWeighted);
  basic_loop(st, st.random_start(), st.config.iterations);
  return std::move(st.result);
}

AttackResult run_attack(const StereoModel& model, const StereoSample& sample,
                        const AttackConfig& config) {
  switch (config.threat_model) {
    case ThreatModel::FGSM: return fgsm(model, sample, config);
    case ThreatModel::BIM: return bim(model, sample, config);
    case ThreatModel::PGD: return pgd(model, sample, config);
    case ThreatModel::APGD: return apgd(model, sample, config);
    case ThreatModel::CosPGD: return cospgd(model, sample, config);
  }
  throw ConfigError("invalid threat model");
}

}  // namespace disprobe
