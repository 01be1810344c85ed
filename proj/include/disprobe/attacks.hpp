#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disprobe/image.hpp"
#include "disprobe/stereo_model.hpp"

namespace disprobe {

enum class ThreatModel { FGSM, BIM, PGD, APGD, CosPGD };
enum class LpNorm { Linf, L2 };
enum class TargetMode { None, Zero, Explicit };
enum class AttackEyes { Both, LeftOnly, RightOnly };

ThreatModel parse_threat_model(const std::string& name);  // ConfigError
std::string to_string(ThreatModel model);
LpNorm parse_lp_norm(const std::string& name);
std::string to_string(LpNorm norm);

struct AttackConfig {
  ThreatModel threat_model = ThreatModel::FGSM;
  int iterations = 1;
  double alpha = 0.01;
  double epsilon = 8.0 / 255.0;  // in [0,1] image units
  LpNorm lp_norm = LpNorm::Linf;
  TargetMode target = TargetMode::None;
  DisparityMap explicit_target;
  AttackEyes eyes = AttackEyes::Both;
  uint64_t seed = 0;

  void validate() const;  // ConfigError; also rejects APGD under L2
};

struct Perturbation {
  ImageBuffer delta_left;
  ImageBuffer delta_right;
};

// Per-iteration bookkeeping, used by budget-soundness checks.
struct IterStat {
  double loss = 0.0;
  double linf_left = 0.0, linf_right = 0.0;
  double l2_left = 0.0, l2_right = 0.0;
  double min_pixel = 0.0, max_pixel = 0.0;
};

struct AttackResult {
  Perturbation perturbation;
  StereoSample adversarial;
  double final_loss = 0.0;
  double clean_loss = 0.0;
  std::vector<IterStat> trace;  // one entry per iterate, including the start
};

// epsilon-ball projection: Linf clamps componentwise, L2 rescales when the
// norm exceeds epsilon.
void project_lp(ImageBuffer& delta, double epsilon, LpNorm norm);

// clamp(clean + delta, 0, 1)
ImageBuffer clip_valid(const ImageBuffer& clean, const ImageBuffer& delta);

AttackResult run_attack(const StereoModel& model, const StereoSample& sample,
                        const AttackConfig& config);

AttackResult fgsm(const StereoModel& model, const StereoSample& sample,
                  const AttackConfig& config);
AttackResult bim(const StereoModel& model, const StereoSample& sample,
                 const AttackConfig& config);
AttackResult pgd(const StereoModel& model, const StereoSample& sample,
                 const AttackConfig& config);
AttackResult apgd(const StereoModel& model, const StereoSample& sample,
                  const AttackConfig& config);
AttackResult cospgd(const StereoModel& model, const StereoSample& sample,
                    const AttackConfig& config);

}  // namespace disprobe
