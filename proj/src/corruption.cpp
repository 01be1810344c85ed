#include "disprobe/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "disprobe/hash.hpp"
#include "disprobe/jpeg_codec.hpp"
#include "disprobe/kernels.hpp"
#include "disprobe/rng.hpp"

namespace disprobe {

namespace {

const char* kKindNames[kNumCorruptionKinds] = {
    "gaussian_noise", "shot_noise", "impulse_noise", "defocus_blur",
    "frosted_glass_blur", "motion_blur", "zoom_blur", "snow", "frost",
    "fog", "brightness", "contrast", "elastic", "pixelate", "jpeg"};

void clamp01(ImageBuffer& img) {
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

ImageBuffer promote3(const ImageBuffer& img) {
  if (img.channels == 3) return img;
  ImageBuffer out(img.height, img.width, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
  return out;
}

ImageBuffer collapse1(const ImageBuffer& img) {
  ImageBuffer out(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(y, x, 0) =
          (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
  return out;
}

// ---------------------------------------------------------------- noise

ImageBuffer gaussian_noise(const ImageBuffer& img, double sigma, RngStream rng) {
  ImageBuffer out = img;
  for (double& v : out.data) v += sigma * rng.next_gaussian();
  return out;
}

ImageBuffer shot_noise(const ImageBuffer& img, double lambda, RngStream rng) {
  ImageBuffer out = img;
  for (double& v : out.data)
    v = rng.next_poisson(std::clamp(v, 0.0, 1.0) * lambda) / lambda;
  return out;
}

ImageBuffer impulse_noise(const ImageBuffer& img, double rate, RngStream rng) {
  ImageBuffer out = img;
  for (double& v : out.data)
    if (rng.next_uniform() < rate) v = rng.next_uniform() < 0.5 ? 0.0 : 1.0;
  return out;
}

// ----------------------------------------------------------------- blur

ImageBuffer convolve_channels(const ImageBuffer& img,
                              const std::vector<double>& kernel, int kh,
                              int kw) {
  const int h = img.height, w = img.width;
  ImageBuffer out = img;
  std::vector<double> plane(static_cast<size_t>(h) * w), dst(plane.size());
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) plane[y * w + x] = img.at(y, x, c);
    kernels::convolve2d_replicate(plane.data(), h, w, kernel.data(), kh, kw,
                                  dst.data());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(y, x, c) = dst[y * w + x];
  }
  return out;
}

ImageBuffer defocus_blur(const ImageBuffer& img, int radius) {
  const int k = 2 * radius + 1;
  std::vector<double> kernel(static_cast<size_t>(k) * k, 0.0);
  double sum = 0.0;
  for (int y = -radius; y <= radius; ++y)
    for (int x = -radius; x <= radius; ++x)
      if (y * y + x * x <= radius * radius) {
        kernel[(y + radius) * k + x + radius] = 1.0;
        sum += 1.0;
      }
  for (double& v : kernel) v /= sum;
  return convolve_channels(img, kernel, k, k);
}

std::vector<double> line_kernel(double angle, int length, int* k_out) {
  const int radius = length / 2;
  const int k = 2 * radius + 1;
  std::vector<double> kernel(static_cast<size_t>(k) * k, 0.0);
  const double dx = std::cos(angle), dy = std::sin(angle);
  double sum = 0.0;
  // bilinear splat along the line through the kernel center
  const int steps = 4 * radius + 1;
  for (int s = 0; s < steps; ++s) {
    const double t = -radius + s * (2.0 * radius / (steps - 1));
    const double fy = radius + t * dy, fx = radius + t * dx;
    const int y0 = static_cast<int>(std::floor(fy));
    const int x0 = static_cast<int>(std::floor(fx));
    const double wy = fy - y0, wx = fx - x0;
    for (int oy = 0; oy < 2; ++oy)
      for (int ox = 0; ox < 2; ++ox) {
        const int yy = y0 + oy, xx = x0 + ox;
        if (yy < 0 || yy >= k || xx < 0 || xx >= k) continue;
        const double wgt = (oy ? wy : 1 - wy) * (ox ? wx : 1 - wx);
        kernel[yy * k + xx] += wgt;
        sum += wgt;
      }
  }
  for (double& v : kernel) v /= sum;
  *k_out = k;
  return kernel;
}

ImageBuffer motion_blur(const ImageBuffer& img, int length, RngStream rng) {
  const double angle = rng.uniform(0.0, M_PI);
  int k;
  std::vector<double> kernel = line_kernel(angle, length, &k);
  return convolve_channels(img, kernel, k, k);
}

ImageBuffer frosted_glass_blur(const ImageBuffer& img, int radius,
                               double sigma, RngStream rng) {
  // Seeded local pixel shuffling within radius, then a Gaussian blur.
  ImageBuffer shuffled = img;
  const int h = img.height, w = img.width;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int dy = static_cast<int>(rng.next_below(2 * radius + 1)) - radius;
      const int dx = static_cast<int>(rng.next_below(2 * radius + 1)) - radius;
      const int sy = std::clamp(y + dy, 0, h - 1);
      const int sx = std::clamp(x + dx, 0, w - 1);
      for (int c = 0; c < img.channels; ++c) {
        std::swap(shuffled.at(y, x, c), shuffled.at(sy, sx, c));
      }
    }
  return kernels::gaussian_blur(shuffled, sigma);
}

ImageBuffer zoom_blur(const ImageBuffer& img, double max_zoom) {
  const int h = img.height, w = img.width;
  ImageBuffer acc(h, w, img.channels, 0.0);
  int n = 0;
  for (double z = 1.0; z < max_zoom + 1e-9; z += 0.02) {
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double fy = std::clamp(cy + (y - cy) / z, 0.0, h - 1.0);
        const double fx = std::clamp(cx + (x - cx) / z, 0.0, w - 1.0);
        const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
        const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const double wy = fy - y0, wx = fx - x0;
        for (int c = 0; c < img.channels; ++c) {
          const double top =
              img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
          const double bot =
              img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
          acc.at(y, x, c) += top * (1 - wy) + bot * wy;
        }
      }
    ++n;
  }
  for (double& v : acc.data) v /= n;
  return acc;
}

// -------------------------------------------------------------- weather

// Diamond-square plasma fractal, normalized to [0,1].
std::vector<double> plasma_fractal(int h, int w, double roughness,
                                   RngStream rng) {
  int size = 1;
  while (size < std::max(h, w)) size *= 2;
  const int n = size + 1;
  std::vector<double> grid(static_cast<size_t>(n) * n, 0.0);
  auto at = [&](int y, int x) -> double& {
    return grid[static_cast<size_t>(y) * n + x];
  };
  at(0, 0) = rng.next_uniform();
  at(0, size) = rng.next_uniform();
  at(size, 0) = rng.next_uniform();
  at(size, size) = rng.next_uniform();

  double amp = 1.0;
  for (int step = size; step > 1; step /= 2) {
    const int half = step / 2;
    // diamond
    for (int y = half; y < n; y += step)
      for (int x = half; x < n; x += step) {
        const double avg = (at(y - half, x - half) + at(y - half, x + half) +
                            at(y + half, x - half) + at(y + half, x + half)) /
                           4.0;
        at(y, x) = avg + amp * rng.uniform(-0.5, 0.5);
      }
    // square
    for (int y = 0; y < n; y += half)
      for (int x = (y / half) % 2 == 0 ? half : 0; x < n; x += step) {
        double sum = 0.0;
        int cnt = 0;
        if (y - half >= 0) { sum += at(y - half, x); ++cnt; }
        if (y + half < n) { sum += at(y + half, x); ++cnt; }
        if (x - half >= 0) { sum += at(y, x - half); ++cnt; }
        if (x + half < n) { sum += at(y, x + half); ++cnt; }
        at(y, x) = sum / cnt + amp * rng.uniform(-0.5, 0.5);
      }
    amp *= roughness;
  }

  std::vector<double> out(static_cast<size_t>(h) * w);
  double lo = 1e300, hi = -1e300;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = at(y, x);
      out[static_cast<size_t>(y) * w + x] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
  for (double& v : out) v = (v - lo) / span;
  return out;
}

ImageBuffer snow(const ImageBuffer& rgb, double amount, double whiten,
                 int blur_len, RngStream rng) {
  const int h = rgb.height, w = rgb.width;
  // seeded noise layer, thresholded into flakes
  ImageBuffer flakes(h, w, 1);
  RngStream noise_rng = rng.substream("flakes");
  const double thr = 1.0 - 0.25 * amount;
  for (double& v : flakes.data) {
    const double u = noise_rng.next_uniform();
    v = u > thr ? (u - thr) / (1.0 - thr) : 0.0;
  }
  flakes = kernels::gaussian_blur(flakes, 1.0);
  // streak the flakes with motion blur
  int k;
  const double angle = rng.substream("angle").uniform(M_PI / 3, 2 * M_PI / 3);
  std::vector<double> kernel = line_kernel(angle, blur_len, &k);
  flakes = convolve_channels(flakes, kernel, k, k);
  double fmax = 0.0;
  for (double v : flakes.data) fmax = std::max(fmax, v);
  if (fmax > 1e-12)
    for (double& v : flakes.data) v = std::min(1.0, v / fmax * amount * 4.0);

  ImageBuffer out = rgb;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double f = flakes.at(y, x, 0);
      for (int c = 0; c < 3; ++c) {
        double v = out.at(y, x, c);
        v = (1.0 - whiten) * v + whiten;  // global whitening
        out.at(y, x, c) = v + f * (1.0 - v);
      }
    }
  return out;
}

ImageBuffer frost(const ImageBuffer& rgb, double blend, RngStream rng) {
  const int h = rgb.height, w = rgb.width;
  // procedural crystalline texture: sharpened plasma fractal
  std::vector<double> plasma = plasma_fractal(h, w, 0.65, rng.substream("tex"));
  ImageBuffer out = rgb;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double p = plasma[static_cast<size_t>(y) * w + x];
      // ridge profile gives vein-like structure
      const double tex = 0.55 + 0.45 * std::abs(2.0 * p - 1.0);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = (1.0 - blend) * out.at(y, x, c) + blend * tex;
    }
  return out;
}

ImageBuffer fog(const ImageBuffer& rgb, double opacity, RngStream rng) {
  const int h = rgb.height, w = rgb.width;
  std::vector<double> haze = plasma_fractal(h, w, 0.7, rng.substream("haze"));
  ImageBuffer out = rgb;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double t = opacity * haze[static_cast<size_t>(y) * w + x];
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = (1.0 - t) * out.at(y, x, c) + t * 0.9;
    }
  return out;
}

// -------------------------------------------------------------- digital

ImageBuffer brightness(const ImageBuffer& img, double shift) {
  ImageBuffer out = img;
  for (double& v : out.data) v += shift;
  return out;
}

ImageBuffer contrast(const ImageBuffer& img, double factor) {
  double mean = 0.0;
  for (double v : img.data) mean += v;
  mean /= static_cast<double>(img.data.size());
  ImageBuffer out = img;
  for (double& v : out.data) v = (v - mean) * factor + mean;
  return out;
}

ImageBuffer pixelate(const ImageBuffer& img, int factor) {
  const int sh = std::max(1, img.height / factor);
  const int sw = std::max(1, img.width / factor);
  ImageBuffer small = kernels::resize_bilinear(img, sh, sw);
  // nearest-neighbor upscale
  ImageBuffer out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    const int sy = std::min(y * sh / img.height, sh - 1);
    for (int x = 0; x < img.width; ++x) {
      const int sx = std::min(x * sw / img.width, sw - 1);
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = small.at(sy, sx, c);
    }
  }
  return out;
}

}  // namespace

const std::array<CorruptionKind, kNumCorruptionKinds>& all_corruption_kinds() {
  static const std::array<CorruptionKind, kNumCorruptionKinds> kinds = [] {
    std::array<CorruptionKind, kNumCorruptionKinds> a{};
    for (int i = 0; i < kNumCorruptionKinds; ++i)
      a[i] = static_cast<CorruptionKind>(i);
    return a;
  }();
  return kinds;
}

std::string to_string(CorruptionKind kind) {
  return kKindNames[static_cast<int>(kind)];
}

CorruptionKind parse_corruption_kind(const std::string& name) {
  for (int i = 0; i < kNumCorruptionKinds; ++i)
    if (name == kKindNames[i]) return static_cast<CorruptionKind>(i);
  throw ConfigError("unknown corruption kind '" + name + "'");
}

void CorruptionSpec::validate() const {
  if (severity < 1 || severity > 5)
    throw ConfigError("severity must be in 1..5, got " +
                      std::to_string(severity));
}

CorruptionParams CorruptionParams::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open corruption params " + path);
  std::string content((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());

  CorruptionParams out;
  out.file_hash_ = sha256_hex(content);

  std::istringstream ss(content);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::istringstream key_ss(line.substr(0, eq));
    std::string key;
    key_ss >> key;
    std::istringstream val_ss(line.substr(eq + 1));
    std::array<double, 5> vals{};
    for (int i = 0; i < 5; ++i)
      if (!(val_ss >> vals[i]))
        throw ConfigError(path + " line " + std::to_string(lineno) +
                          ": expected 5 values for " + key);
    out.tables_[key] = vals;
  }
  return out;
}

double CorruptionParams::get(const std::string& key, int severity) const {
  auto it = tables_.find(key);
  if (it == tables_.end())
    throw ConfigError("corruption parameter table missing key '" + key + "'");
  if (severity < 1 || severity > 5)
    throw ConfigError("severity must be in 1..5");
  return it->second[severity - 1];
}

ImageBuffer apply_corruption(const ImageBuffer& image,
                             const CorruptionSpec& spec,
                             const CorruptionParams& params) {
  spec.validate();
  const int s = spec.severity;
  RngStream rng = RngStream(spec.seed).substream(to_string(spec.kind));

  // color-dependent kinds run on a 3-channel promotion
  const bool needs_color =
      spec.kind == CorruptionKind::Snow || spec.kind == CorruptionKind::Frost ||
      spec.kind == CorruptionKind::Fog || spec.kind == CorruptionKind::Jpeg;
  const bool was_gray = image.channels == 1;
  ImageBuffer work = needs_color ? promote3(image) : image;

  ImageBuffer out;
  switch (spec.kind) {
    case CorruptionKind::GaussianNoise:
      out = gaussian_noise(work, params.get("gaussian_noise.sigma", s), rng);
      break;
    case CorruptionKind::ShotNoise:
      out = shot_noise(work, params.get("shot_noise.lambda", s), rng);
      break;
    case CorruptionKind::ImpulseNoise:
      out = impulse_noise(work, params.get("impulse_noise.rate", s), rng);
      break;
    case CorruptionKind::DefocusBlur:
      out = defocus_blur(
          work, static_cast<int>(params.get("defocus_blur.radius", s)));
      break;
    case CorruptionKind::FrostedGlassBlur:
      out = frosted_glass_blur(
          work, static_cast<int>(params.get("frosted_glass_blur.radius", s)),
          params.get("frosted_glass_blur.sigma", s), rng);
      break;
    case CorruptionKind::MotionBlur:
      out = motion_blur(work,
                        static_cast<int>(params.get("motion_blur.length", s)),
                        rng);
      break;
    case CorruptionKind::ZoomBlur:
      out = zoom_blur(work, params.get("zoom_blur.max_zoom", s));
      break;
    case CorruptionKind::Snow:
      out = snow(work, params.get("snow.amount", s),
                 params.get("snow.whiten", s),
                 static_cast<int>(params.get("snow.blur_len", s)), rng);
      break;
    case CorruptionKind::Frost:
      out = frost(work, params.get("frost.blend", s), rng);
      break;
    case CorruptionKind::Fog:
      out = fog(work, params.get("fog.opacity", s), rng);
      break;
    case CorruptionKind::Brightness:
      out = brightness(work, params.get("brightness.shift", s));
      break;
    case CorruptionKind::Contrast:
      out = contrast(work, params.get("contrast.factor", s));
      break;
    case CorruptionKind::Elastic:
      out = elastic_transform(work, params.get("elastic.alpha", s),
                              params.get("elastic.sigma", s),
                              rng.substream("field").next_u64());
      break;
    case CorruptionKind::Pixelate:
      out = pixelate(work, static_cast<int>(params.get("pixelate.factor", s)));
      break;
    case CorruptionKind::Jpeg:
      out = jpeg_roundtrip(
          work, static_cast<int>(params.get("jpeg.quality", s)));
      break;
  }

  if (needs_color && was_gray) out = collapse1(out);
  clamp01(out);
  return out;
}

StereoSample corrupt_stereo_pair(const StereoSample& sample,
                                 const CorruptionSpec& spec,
                                 const CorruptionParams& params) {
  spec.validate();
  RngStream base = RngStream(spec.seed).substream(sample.id);

  StereoSample out = sample;  // ground truth and mask untouched
  CorruptionSpec left_spec = spec;
  left_spec.seed = base.substream("left").next_u64();
  out.left = apply_corruption(sample.left, left_spec, params);

  CorruptionSpec right_spec = spec;
  right_spec.seed = base.substream("right").next_u64();
  out.right = apply_corruption(sample.right, right_spec, params);
  return out;
}

ImageBuffer elastic_transform(const ImageBuffer& image, double alpha,
                              double sigma, uint64_t seed) {
  if (alpha < 0.0) throw ConfigError("elastic: alpha must be >= 0");
  if (sigma <= 0.0) throw ConfigError("elastic: sigma must be > 0");
  if (alpha == 0.0) return image;

  const int h = image.height, w = image.width;
  RngStream rng(seed);
  std::vector<double> dy(static_cast<size_t>(h) * w), dx(dy.size());
  for (double& v : dy) v = rng.uniform(-1.0, 1.0);
  for (double& v : dx) v = rng.uniform(-1.0, 1.0);

  // smooth, then rescale so the maximum displacement magnitude equals alpha
  const std::vector<double> g = kernels::gaussian_kernel_1d(sigma);
  const int klen = static_cast<int>(g.size());
  std::vector<double> tmp(dy.size());
  for (std::vector<double>* field : {&dy, &dx}) {
    kernels::convolve2d_replicate(field->data(), h, w, g.data(), 1, klen,
                                  tmp.data());
    kernels::convolve2d_replicate(tmp.data(), h, w, g.data(), klen, 1,
                                  field->data());
  }
  double maxmag = 0.0;
  for (size_t k = 0; k < dy.size(); ++k)
    maxmag = std::max(maxmag, std::hypot(dy[k], dx[k]));
  const double scale = maxmag > 1e-12 ? alpha / maxmag : 0.0;

  ImageBuffer out(h, w, image.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t k = static_cast<size_t>(y) * w + x;
      const double fy = std::clamp(y + scale * dy[k], 0.0, h - 1.0);
      const double fx = std::clamp(x + scale * dx[k], 0.0, w - 1.0);
      const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double wy = fy - y0, wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top =
            image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
        const double bot =
            image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  return out;
}

}  // namespace disprobe
