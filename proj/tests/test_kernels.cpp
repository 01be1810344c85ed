#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "disprobe/kernels.hpp"
#include "disprobe/rng.hpp"
#include "test_util.hpp"

using namespace disprobe;
using namespace disprobe::kernels;

TEST_CASE("parallel kernels match serial references bit for bit") {
  const ImageBuffer img = testutil::make_texture(37, 53, 1, 1);

  SUBCASE("convolve2d") {
    const std::vector<double> k1 = gaussian_kernel_1d(2.0);
    const int kh = static_cast<int>(k1.size());
    std::vector<double> kernel(static_cast<size_t>(kh) * kh);
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kh; ++j) kernel[i * kh + j] = k1[i] * k1[j];
    std::vector<double> a(img.data.size()), b(img.data.size());
    convolve2d_replicate(img.data.data(), img.height, img.width, kernel.data(),
                         kh, kh, a.data());
    convolve2d_replicate_serial(img.data.data(), img.height, img.width,
                                kernel.data(), kh, kh, b.data());
    CHECK(a == b);
  }

  SUBCASE("conv2d_forward") {
    const int h = 11, w = 13, cin = 3, cout = 5, kh = 3;
    std::vector<double> input(static_cast<size_t>(h) * w * cin);
    std::vector<double> kernel(static_cast<size_t>(kh) * kh * cin * cout);
    RngStream rng(2);
    for (double& v : input) v = rng.next_gaussian();
    for (double& v : kernel) v = rng.next_gaussian();
    for (bool padded : {true, false}) {
      const int oh = padded ? h : h - kh + 1;
      const int ow = padded ? w : w - kh + 1;
      std::vector<double> a(static_cast<size_t>(oh) * ow * cout), b(a.size());
      conv2d_forward(input.data(), h, w, cin, kernel.data(), kh, kh, cout,
                     padded, a.data());
      conv2d_forward_serial(input.data(), h, w, cin, kernel.data(), kh, kh,
                            cout, padded, b.data());
      CHECK(a == b);
    }
  }

  SUBCASE("sad_block_match") {
    const StereoSample s = testutil::make_shifted_pair(25, 40, 5, 3);
    std::vector<double> a(static_cast<size_t>(25) * 40), b(a.size());
    sad_block_match(s.left, s.right, 12, 5, a.data());
    sad_block_match_serial(s.left, s.right, 12, 5, b.data());
    CHECK(a == b);
  }
}

TEST_CASE("gaussian kernel is normalized and symmetric") {
  const std::vector<double> k = gaussian_kernel_1d(1.7);
  CHECK(k.size() % 2 == 1);
  CHECK(std::accumulate(k.begin(), k.end(), 0.0) == doctest::Approx(1.0));
  for (size_t i = 0; i < k.size() / 2; ++i)
    CHECK(k[i] == doctest::Approx(k[k.size() - 1 - i]));
}

TEST_CASE("gaussian blur preserves constants and the mean") {
  const ImageBuffer flat(9, 9, 1, 0.4);
  const ImageBuffer blurred = gaussian_blur(flat, 2.0);
  for (double v : blurred.data) CHECK(v == doctest::Approx(0.4));

  const ImageBuffer img = testutil::make_texture(31, 31, 1, 4);
  const ImageBuffer out = gaussian_blur(img, 1.5);
  // variance shrinks under smoothing
  auto variance = [](const ImageBuffer& x) {
    double m = 0.0;
    for (double v : x.data) m += v;
    m /= static_cast<double>(x.data.size());
    double s = 0.0;
    for (double v : x.data) s += (v - m) * (v - m);
    return s / static_cast<double>(x.data.size());
  };
  CHECK(variance(out) < variance(img));
}

TEST_CASE("resize_bilinear identity and exact downscale") {
  const ImageBuffer img = testutil::make_texture(16, 12, 3, 5);
  const ImageBuffer same = resize_bilinear(img, 16, 12);
  for (size_t k = 0; k < img.data.size(); ++k)
    CHECK(same.data[k] == doctest::Approx(img.data[k]));

  const ImageBuffer up = resize_bilinear(img, 32, 24);
  CHECK(up.height == 32);
  CHECK(up.width == 24);
  double lo = 1.0, hi = 0.0;
  for (double v : up.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
}

TEST_CASE("conv2d gradients agree with finite differences") {
  const int h = 6, w = 7, cin = 2, cout = 3, kh = 3;
  std::vector<double> input(static_cast<size_t>(h) * w * cin);
  std::vector<double> kernel(static_cast<size_t>(kh) * kh * cin * cout);
  RngStream rng(6);
  for (double& v : input) v = rng.next_gaussian();
  for (double& v : kernel) v = rng.next_gaussian();

  for (bool padded : {true, false}) {
    const int oh = padded ? h : h - kh + 1;
    const int ow = padded ? w : w - kh + 1;
    const size_t out_n = static_cast<size_t>(oh) * ow * cout;
    // loss = sum of outputs, so grad_out is all ones
    std::vector<double> grad_out(out_n, 1.0);
    auto loss = [&](const std::vector<double>& in,
                    const std::vector<double>& ker) {
      std::vector<double> out(out_n);
      conv2d_forward(in.data(), h, w, cin, ker.data(), kh, kh, cout, padded,
                     out.data());
      return std::accumulate(out.begin(), out.end(), 0.0);
    };

    std::vector<double> gi(input.size(), 0.0), gk(kernel.size(), 0.0);
    conv2d_backward_input(grad_out.data(), h, w, cin, kernel.data(), kh, kh,
                          cout, padded, gi.data());
    conv2d_backward_kernel(input.data(), grad_out.data(), h, w, cin, kh, kh,
                           cout, padded, gk.data());

    const double step = 1e-6;
    for (size_t k = 0; k < input.size(); k += 7) {
      std::vector<double> plus = input, minus = input;
      plus[k] += step;
      minus[k] -= step;
      const double fd = (loss(plus, kernel) - loss(minus, kernel)) / (2 * step);
      CHECK(gi[k] == doctest::Approx(fd).epsilon(1e-5));
    }
    for (size_t k = 0; k < kernel.size(); k += 11) {
      std::vector<double> plus = kernel, minus = kernel;
      plus[k] += step;
      minus[k] -= step;
      const double fd = (loss(input, plus) - loss(input, minus)) / (2 * step);
      CHECK(gk[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("sad block matching recovers a known shift and breaks ties low") {
  const StereoSample s = testutil::make_shifted_pair(20, 40, 4, 7);
  std::vector<double> disp(static_cast<size_t>(20) * 40);
  sad_block_match(s.left, s.right, 10, 5, disp.data());
  int correct = 0, interior = 0;
  for (int i = 3; i < 17; ++i)
    for (int j = 10; j < 37; ++j) {
      ++interior;
      if (disp[static_cast<size_t>(i) * 40 + j] == 4.0) ++correct;
    }
  CHECK(static_cast<double>(correct) / interior > 0.95);

  // constant images: every disparity ties, the smallest must win
  const ImageBuffer flat(8, 8, 1, 0.5);
  StereoSample f{flat, flat, DisparityMap(8, 8), "flat"};
  std::vector<double> tie(64);
  sad_block_match(f.left, f.right, 5, 3, tie.data());
  for (double v : tie) CHECK(v == 0.0);
}
