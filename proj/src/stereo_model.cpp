#include "disprobe/stereo_model.hpp"

#include <algorithm>
#include <cmath>

#include "disprobe/kernels.hpp"
#include "disprobe/rng.hpp"

namespace disprobe {

using diff::Tape;
using diff::Tensor;
using diff::Var;

void ModelConfig::validate() const {
  if (max_disparity < 1) throw ConfigError("max_disparity must be >= 1");
  if (feature_channels < 1) throw ConfigError("feature_channels must be >= 1");
  if (feature_layers < 1) throw ConfigError("feature_layers must be >= 1");
  if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  if (name == "refnet") {
    // defaults
  } else if (name == "refnet-small") {
    c.max_disparity = 16;
    c.feature_channels = 4;
    c.weight_seed = 11;
  } else if (name == "refnet-wide") {
    c.max_disparity = 64;
    c.feature_channels = 12;
    c.weight_seed = 23;
  } else {
    throw ConfigError("unknown model preset '" + name + "'");
  }
  return c;
}

const std::vector<std::string>& ModelConfig::preset_names() {
  static const std::vector<std::string> names = {"refnet", "refnet-small",
                                                 "refnet-wide"};
  return names;
}

Tensor image_to_tensor(const ImageBuffer& img) {
  return Tensor({img.height, img.width, img.channels}, img.data);
}

ImageBuffer tensor_to_image(const Tensor& t) {
  if (t.rank() != 3) throw ShapeError("expected H x W x C tensor");
  ImageBuffer img(t.shape[0], t.shape[1], t.shape[2]);
  img.data = t.data;
  return img;
}

StereoModel::StereoModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  RngStream rng(config_.weight_seed);
  // first layer takes 3 channels; grayscale inputs are promoted on the tape
  int cin = 3;
  for (int layer = 0; layer < config_.feature_layers; ++layer) {
    RngStream lrng = rng.substream("layer").substream(layer);
    const int cout = config_.feature_channels;
    Tensor w({3, 3, cin, cout}, 0.0);
    const double scale = 1.0 / std::sqrt(9.0 * cin);
    for (double& v : w.data) v = scale * lrng.next_gaussian();
    // zero-mean each filter: a DC component would make the features track
    // the local brightness, which is too smooth to localize a match
    for (int o = 0; o < cout; ++o) {
      double mean = 0.0;
      for (int t = 0; t < 9 * cin; ++t) mean += w.data[t * cout + o];
      mean /= 9.0 * cin;
      for (int t = 0; t < 9 * cin; ++t) w.data[t * cout + o] -= mean;
    }
    layer_weights_.push_back(std::move(w));
    cin = cout;
  }
}

Var StereoModel::extract_features(Tape& tape, Var image) const {
  const Tensor& v = tape.value(image);
  if (v.rank() != 3) throw ShapeError("extract_features: expected H x W x C");
  if (v.shape[0] < receptive_field() || v.shape[1] < receptive_field())
    throw ShapeError("extract_features: image smaller than receptive field");
  int expected = layer_weights_[0].shape[2];
  Var x = image;
  if (v.shape[2] != expected) {
    if (v.shape[2] != 1)
      throw ShapeError("extract_features: unsupported channel count");
    // promote grayscale by replicating the plane across channels
    Var plane = tape.sum_axis(image, 2);  // H x W
    x = tape.stack_last(std::vector<Var>(expected, plane));
  }
  for (const Tensor& w : layer_weights_) {
    Var k = tape.leaf(w, false);
    x = tape.sigmoid(tape.conv2d(x, k, /*same_padding=*/true));
  }
  return x;
}

Var StereoModel::build_cost_volume(Tape& tape, Var feat_left,
                                   Var feat_right) const {
  const Tensor& fl = tape.value(feat_left);
  const Tensor& fr = tape.value(feat_right);
  if (!fl.same_shape(fr))
    throw ShapeError("build_cost_volume: feature shape mismatch");
  const int h = fl.shape[0], w = fl.shape[1];
  const int d_max = config_.max_disparity;
  if (d_max > w) throw ConfigError("max_disparity exceeds image width");

  const int c = fl.shape[2];  // copy before pushes invalidate fl/fr

  const double eps = 1e-8;
  Var eps_leaf = tape.leaf(Tensor({h, w}, eps), false);

  // zero-mean the channel vectors: sigmoid features are all positive, so
  // raw cosine similarity is near 1 at every shift and carries no signal
  // the x10 gain cancels out of the normalized correlation but keeps the
  // squared norms near unit scale, where the rsqrt is well conditioned
  auto center = [&](Var feat) {
    Var mean = tape.scalar_mul(tape.sum_axis(feat, 2), 1.0 / c);
    Var mean3 = tape.stack_last(std::vector<Var>(c, mean));
    return tape.scalar_mul(tape.sub(feat, mean3), 10.0);
  };

  auto inv_norm = [&](Var feat) {
    Var sumsq = tape.sum_axis(tape.mul(feat, feat), 2);  // H x W
    return tape.exp_(
        tape.scalar_mul(tape.log_(tape.add(sumsq, eps_leaf)), -0.5));
  };

  Var cl = center(feat_left);
  Var cr = center(feat_right);
  Var inv_l = inv_norm(cl);
  std::vector<Var> slices;
  slices.reserve(d_max);
  for (int d = 0; d < d_max; ++d) {
    Var cr_d = d == 0 ? cr : tape.shift_horizontal(cr, d);
    Var dot = tape.sum_axis(tape.mul(cl, cr_d), 2);
    Var corr = tape.mul(tape.mul(dot, inv_l), inv_norm(cr_d));
    slices.push_back(tape.scalar_mul(corr, -1.0));  // cost = -correlation
  }
  return tape.stack_last(slices);  // H x W x D
}

Var StereoModel::soft_argmin(Tape& tape, Var volume) const {
  return soft_argmin(tape, volume, config_.temperature);
}

Var StereoModel::soft_argmin(Tape& tape, Var volume, double temperature) const {
  if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
  const Tensor& v = tape.value(volume);
  if (v.rank() != 3) throw ShapeError("soft_argmin: expected H x W x D");
  const int d_max = v.shape[2];
  Var p = tape.softmax_axis(tape.scalar_mul(volume, -1.0 / temperature), 2);
  std::vector<double> indices(d_max);
  for (int d = 0; d < d_max; ++d) indices[d] = d;
  return tape.weighted_sum(p, indices, 2);  // H x W
}

Var StereoModel::forward(Tape& tape, Var left, Var right) const {
  Var fl = extract_features(tape, left);
  Var fr = extract_features(tape, right);
  Var volume = build_cost_volume(tape, fl, fr);
  return soft_argmin(tape, volume);
}

DisparityMap StereoModel::predict(const StereoSample& sample) const {
  sample.check_consistent();
  Tape tape;
  Var left = tape.leaf(image_to_tensor(sample.left), false);
  Var right = tape.leaf(image_to_tensor(sample.right), false);
  Var disp = forward(tape, left, right);

  const Tensor& v = tape.value(disp);
  DisparityMap map(v.shape[0], v.shape[1]);
  map.values = v.data;
  return map;
}

Var attack_loss(Tape& tape, Var pred, const DisparityMap& reference,
                LossMode mode, int max_disparity) {
  // copy the shape up front: node references are invalidated by later pushes
  const std::vector<int> pred_shape = tape.value(pred).shape;
  if (pred_shape.size() != 2 || pred_shape[0] != reference.height ||
      pred_shape[1] != reference.width)
    throw ShapeError("attack_loss: prediction/reference shape mismatch");

  const size_t total = reference.values.size();
  size_t n_valid = 0;
  Tensor mask({reference.height, reference.width}, 0.0);
  Tensor ref({reference.height, reference.width}, 0.0);
  for (size_t k = 0; k < total; ++k) {
    ref.data[k] = reference.values[k];
    if (reference.valid[k]) {
      mask.data[k] = 1.0;
      ++n_valid;
    }
  }
  if (n_valid == 0) throw MetricError("attack_loss: no valid reference pixels");

  Var ref_leaf = tape.leaf(ref, false);
  Var mask_leaf = tape.leaf(mask, false);
  Var absdiff = tape.abs_(tape.sub(pred, ref_leaf));

  Var weighted = absdiff;
  if (mode == LossMode::CosineWeighted) {
    // Scalars are embedded as 2-vectors (s, 1-s) with s = sigmoid(v / D);
    // cosine similarity of the embeddings weights the per-pixel loss.
    const double inv_d = 1.0 / max_disparity;
    Var ones = tape.leaf(Tensor(pred_shape, 1.0), false);
    Var sp = tape.sigmoid(tape.scalar_mul(pred, inv_d));
    Var sq = tape.sub(ones, sp);

    Tensor ref_s(pred_shape, 0.0);
    Tensor ref_inv_norm(pred_shape, 0.0);
    for (size_t k = 0; k < total; ++k) {
      const double r = 1.0 / (1.0 + std::exp(-ref.data[k] * inv_d));
      ref_s.data[k] = r;
      ref_inv_norm.data[k] = 1.0 / std::sqrt(r * r + (1.0 - r) * (1.0 - r));
    }
    Tensor ref_q = ref_s;
    for (double& v : ref_q.data) v = 1.0 - v;

    Var dot = tape.add(tape.mul(sp, tape.leaf(ref_s, false)),
                       tape.mul(sq, tape.leaf(ref_q, false)));
    // embeddings have norm^2 >= 1/2, so no epsilon is needed
    Var norm_sq = tape.add(tape.mul(sp, sp), tape.mul(sq, sq));
    Var inv_norm = tape.exp_(tape.scalar_mul(tape.log_(norm_sq), -0.5));
    Var cosine = tape.mul(tape.mul(dot, inv_norm),
                          tape.leaf(ref_inv_norm, false));
    weighted = tape.mul(cosine, absdiff);
  }

  Var masked = tape.mul(weighted, mask_leaf);
  return tape.scalar_mul(tape.mean_all(masked),
                         static_cast<double>(total) /
                             static_cast<double>(n_valid));
}

GradResult StereoModel::input_gradient(const StereoSample& sample,
                                       LossMode mode,
                                       const DisparityMap& reference) const {
  sample.check_consistent();
  Tape tape;
  Var left = tape.leaf(image_to_tensor(sample.left), true);
  Var right = tape.leaf(image_to_tensor(sample.right), true);
  Var disp = forward(tape, left, right);
  Var loss = attack_loss(tape, disp, reference, mode, config_.max_disparity);
  tape.backward(loss);

  GradResult out;
  out.grad_left = tensor_to_image(tape.grad(left));
  out.grad_right = tensor_to_image(tape.grad(right));
  out.loss = tape.scalar(loss);
  const Tensor& dv = tape.value(disp);
  out.prediction = DisparityMap(dv.shape[0], dv.shape[1]);
  out.prediction.values = dv.data;
  return out;
}

DisparityMap block_matching_oracle(const StereoSample& sample,
                                   int max_disparity, int window) {
  if (window % 2 == 0) throw ConfigError("block matching window must be odd");
  sample.check_consistent();
  DisparityMap map(sample.left.height, sample.left.width);
  kernels::sad_block_match(sample.left, sample.right, max_disparity, window,
                           map.values.data());
  return map;
}

}  // namespace disprobe
