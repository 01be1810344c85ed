#pragma once

#include <vector>

#include "disprobe/image.hpp"

namespace disprobe::kernels {

// Hot inner loops live here, each as an OpenMP-parallel kernel plus a serial
// reference. Every output element is computed independently with the same
// inner-loop order, so parallel and serial results are bit-identical.

// 2D convolution of a single plane with replicate (edge-clamp) borders.
// kernel is kh x kw, anchored at its center.
void convolve2d_replicate(const double* src, int h, int w, const double* kernel,
                          int kh, int kw, double* dst);
void convolve2d_replicate_serial(const double* src, int h, int w,
                                 const double* kernel, int kh, int kw,
                                 double* dst);

// Separable Gaussian blur applied per channel, replicate borders.
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

std::vector<double> gaussian_kernel_1d(double sigma);

// Bilinear resize with edge clamping.
ImageBuffer resize_bilinear(const ImageBuffer& img, int out_h, int out_w);

// conv2d for the autodiff core: input h x w x cin (row-major, channel
// fastest), kernel kh x kw x cin x cout, stride 1.
// padded=true -> "same" output (replicate-free zero padding),
// padded=false -> "valid" output of size (h-kh+1) x (w-kw+1).
void conv2d_forward(const double* input, int h, int w, int cin,
                    const double* kernel, int kh, int kw, int cout, bool padded,
                    double* output);
void conv2d_forward_serial(const double* input, int h, int w, int cin,
                           const double* kernel, int kh, int kw, int cout,
                           bool padded, double* output);
void conv2d_backward_input(const double* grad_out, int h, int w, int cin,
                           const double* kernel, int kh, int kw, int cout,
                           bool padded, double* grad_input);
void conv2d_backward_kernel(const double* input, const double* grad_out, int h,
                            int w, int cin, int kh, int kw, int cout,
                            bool padded, double* grad_kernel);

// Sum-of-absolute-differences block matching: per pixel, the disparity in
// [0, d_max) minimizing windowed SAD, ties broken toward smaller d.
// Right-image lookups are edge-clamped.
void sad_block_match(const ImageBuffer& left, const ImageBuffer& right,
                     int d_max, int window, double* disparity);
void sad_block_match_serial(const ImageBuffer& left, const ImageBuffer& right,
                            int d_max, int window, double* disparity);

}  // namespace disprobe::kernels
