#include "disprobe/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace disprobe::kernels {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

inline void convolve2d_row(const double* src, int h, int w, const double* kernel,
                           int kh, int kw, double* dst, int y) {
  const int ay = kh / 2, ax = kw / 2;
  for (int x = 0; x < w; ++x) {
    double acc = 0.0;
    for (int ky = 0; ky < kh; ++ky) {
      const int sy = clampi(y + ky - ay, 0, h - 1);
      for (int kx = 0; kx < kw; ++kx) {
        const int sx = clampi(x + kx - ax, 0, w - 1);
        acc += kernel[ky * kw + kx] * src[sy * w + sx];
      }
    }
    dst[y * w + x] = acc;
  }
}

inline void conv2d_forward_row(const double* input, int h, int w, int cin,
                               const double* kernel, int kh, int kw, int cout,
                               bool padded, double* output, int y, int ow) {
  const int ph = padded ? kh / 2 : 0;
  const int pw = padded ? kw / 2 : 0;
  for (int x = 0; x < ow; ++x) {
    double* out = output + (static_cast<size_t>(y) * ow + x) * cout;
    for (int co = 0; co < cout; ++co) out[co] = 0.0;
    for (int ky = 0; ky < kh; ++ky) {
      const int iy = y + ky - ph;
      if (iy < 0 || iy >= h) continue;
      for (int kx = 0; kx < kw; ++kx) {
        const int ix = x + kx - pw;
        if (ix < 0 || ix >= w) continue;
        const double* in = input + (static_cast<size_t>(iy) * w + ix) * cin;
        const double* k = kernel + ((static_cast<size_t>(ky) * kw + kx) * cin) * cout;
        for (int ci = 0; ci < cin; ++ci)
          for (int co = 0; co < cout; ++co)
            out[co] += in[ci] * k[ci * cout + co];
      }
    }
  }
}

inline void sad_match_row(const ImageBuffer& left, const ImageBuffer& right,
                          int d_max, int window, double* disparity, int y) {
  const int h = left.height, w = left.width, c = left.channels;
  const int r = window / 2;
  for (int x = 0; x < w; ++x) {
    double best = std::numeric_limits<double>::infinity();
    int best_d = 0;
    for (int d = 0; d < d_max; ++d) {
      double sad = 0.0;
      for (int wy = -r; wy <= r; ++wy) {
        const int ly = clampi(y + wy, 0, h - 1);
        for (int wx = -r; wx <= r; ++wx) {
          const int lx = clampi(x + wx, 0, w - 1);
          const int rx = clampi(lx - d, 0, w - 1);
          for (int ch = 0; ch < c; ++ch)
            sad += std::abs(left.at(ly, lx, ch) - right.at(ly, rx, ch));
        }
      }
      if (sad < best) {  // strict: ties keep the smaller d
        best = sad;
        best_d = d;
      }
    }
    disparity[y * w + x] = best_d;
  }
}

}  // namespace

void convolve2d_replicate(const double* src, int h, int w, const double* kernel,
                          int kh, int kw, double* dst) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) convolve2d_row(src, h, w, kernel, kh, kw, dst, y);
}

void convolve2d_replicate_serial(const double* src, int h, int w,
                                 const double* kernel, int kh, int kw,
                                 double* dst) {
  for (int y = 0; y < h; ++y) convolve2d_row(src, h, w, kernel, kh, kw, dst, y);
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  if (sigma <= 0.0) return img;
  const std::vector<double> k = gaussian_kernel_1d(sigma);
  const int h = img.height, w = img.width, c = img.channels;

  ImageBuffer out = img;
  std::vector<double> plane(static_cast<size_t>(h) * w);
  std::vector<double> tmp(plane.size());
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) plane[y * w + x] = img.at(y, x, ch);
    convolve2d_replicate(plane.data(), h, w, k.data(), 1,
                         static_cast<int>(k.size()), tmp.data());
    convolve2d_replicate(tmp.data(), h, w, k.data(), static_cast<int>(k.size()),
                         1, plane.data());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(y, x, ch) = plane[y * w + x];
  }
  return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_h, int out_w) {
  ImageBuffer out(out_h, out_w, img.channels);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = clampi(y0 + 1, 0, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = clampi(x0 + 1, 0, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

void conv2d_forward(const double* input, int h, int w, int cin,
                    const double* kernel, int kh, int kw, int cout, bool padded,
                    double* output) {
  const int oh = padded ? h : h - kh + 1;
  const int ow = padded ? w : w - kw + 1;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < oh; ++y)
    conv2d_forward_row(input, h, w, cin, kernel, kh, kw, cout, padded, output,
                       y, ow);
}

void conv2d_forward_serial(const double* input, int h, int w, int cin,
                           const double* kernel, int kh, int kw, int cout,
                           bool padded, double* output) {
  const int oh = padded ? h : h - kh + 1;
  const int ow = padded ? w : w - kw + 1;
  for (int y = 0; y < oh; ++y)
    conv2d_forward_row(input, h, w, cin, kernel, kh, kw, cout, padded, output,
                       y, ow);
}

void conv2d_backward_input(const double* grad_out, int h, int w, int cin,
                           const double* kernel, int kh, int kw, int cout,
                           bool padded, double* grad_input) {
  const int oh = padded ? h : h - kh + 1;
  const int ow = padded ? w : w - kw + 1;
  const int ph = padded ? kh / 2 : 0;
  const int pw = padded ? kw / 2 : 0;
#pragma omp parallel for schedule(static)
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      double* gin = grad_input + (static_cast<size_t>(iy) * w + ix) * cin;
      for (int ci = 0; ci < cin; ++ci) gin[ci] = 0.0;
      for (int ky = 0; ky < kh; ++ky) {
        const int oy = iy - ky + ph;
        if (oy < 0 || oy >= oh) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ox = ix - kx + pw;
          if (ox < 0 || ox >= ow) continue;
          const double* go = grad_out + (static_cast<size_t>(oy) * ow + ox) * cout;
          const double* k =
              kernel + ((static_cast<size_t>(ky) * kw + kx) * cin) * cout;
          for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < cout; ++co)
              gin[ci] += go[co] * k[ci * cout + co];
        }
      }
    }
  }
}

void conv2d_backward_kernel(const double* input, const double* grad_out, int h,
                            int w, int cin, int kh, int kw, int cout,
                            bool padded, double* grad_kernel) {
  const int oh = padded ? h : h - kh + 1;
  const int ow = padded ? w : w - kw + 1;
  const int ph = padded ? kh / 2 : 0;
  const int pw = padded ? kw / 2 : 0;
  const int kelems = kh * kw * cin * cout;
#pragma omp parallel for schedule(static)
  for (int ke = 0; ke < kelems; ++ke) {
    const int co = ke % cout;
    const int ci = (ke / cout) % cin;
    const int kx = (ke / (cout * cin)) % kw;
    const int ky = ke / (cout * cin * kw);
    double acc = 0.0;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy + ky - ph;
      if (iy < 0 || iy >= h) continue;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox + kx - pw;
        if (ix < 0 || ix >= w) continue;
        acc += input[(static_cast<size_t>(iy) * w + ix) * cin + ci] *
               grad_out[(static_cast<size_t>(oy) * ow + ox) * cout + co];
      }
    }
    grad_kernel[ke] = acc;
  }
}

void sad_block_match(const ImageBuffer& left, const ImageBuffer& right,
                     int d_max, int window, double* disparity) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < left.height; ++y)
    sad_match_row(left, right, d_max, window, disparity, y);
}

void sad_block_match_serial(const ImageBuffer& left, const ImageBuffer& right,
                            int d_max, int window, double* disparity) {
  for (int y = 0; y < left.height; ++y)
    sad_match_row(left, right, d_max, window, disparity, y);
}

}  // namespace disprobe::kernels
