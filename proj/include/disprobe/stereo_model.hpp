#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "disprobe/image.hpp"
#include "disprobe/tape.hpp"

namespace disprobe {

struct ModelConfig {
  int max_disparity = 32;
  int feature_channels = 8;
  int feature_layers = 2;
  double temperature = 0.1;
  uint64_t weight_seed = 7;

  void validate() const;
  // Named presets stand in for a downloadable model zoo.
  static ModelConfig preset(const std::string& name);
  static const std::vector<std::string>& preset_names();
};

enum class LossMode { Plain, CosineWeighted };

// Per-pixel attack loss over valid reference pixels, built on the tape so
// it can be backpropagated to the inputs. `pred` is H x W.
diff::Var attack_loss(diff::Tape& tape, diff::Var pred,
                      const DisparityMap& reference, LossMode mode,
                      int max_disparity);

struct GradResult {
  ImageBuffer grad_left;
  ImageBuffer grad_right;
  double loss = 0.0;
  DisparityMap prediction;
};

// Correlation cost-volume matcher with seeded random feature weights.
// Untrained on purpose: the toolkit benchmarks robustness machinery, and
// correlation of random features is still a functioning matcher on
// textured scenes.
class StereoModel {
 public:
  explicit StereoModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  // H x W x C image tensor -> H x W x feature_channels; weights shared
  // between the two eyes.
  diff::Var extract_features(diff::Tape& tape, diff::Var image) const;

  // cost(i,j,d) = negative normalized correlation between left feature
  // (i,j) and right feature (i,j-d), edge-clamped; H x W x D.
  diff::Var build_cost_volume(diff::Tape& tape, diff::Var feat_left,
                              diff::Var feat_right) const;

  // expectation of d under softmax(-cost / temperature); H x W.
  diff::Var soft_argmin(diff::Tape& tape, diff::Var volume) const;
  diff::Var soft_argmin(diff::Tape& tape, diff::Var volume,
                        double temperature) const;

  DisparityMap predict(const StereoSample& sample) const;

  GradResult input_gradient(const StereoSample& sample, LossMode mode,
                            const DisparityMap& reference) const;

  int receptive_field() const { return 2 * config_.feature_layers + 1; }

 private:
  diff::Var forward(diff::Tape& tape, diff::Var left, diff::Var right) const;

  ModelConfig config_;
  std::vector<diff::Tensor> layer_weights_;  // 3 x 3 x cin x cout each
};

// Non-differentiable SAD baseline; ties broken toward smaller d.
DisparityMap block_matching_oracle(const StereoSample& sample, int max_disparity,
                                   int window);

diff::Tensor image_to_tensor(const ImageBuffer& img);
ImageBuffer tensor_to_image(const diff::Tensor& t);

}  // namespace disprobe
