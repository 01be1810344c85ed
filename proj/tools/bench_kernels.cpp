// Compares the OpenMP kernels against their serial references: wall time
// for both and the maximum absolute output difference (expected 0).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "disprobe/image.hpp"
#include "disprobe/kernels.hpp"
#include "disprobe/rng.hpp"

using namespace disprobe;

namespace {

double seconds(const std::function<void()>& fn, int reps) {
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const std::chrono::duration<double> dt =
      std::chrono::steady_clock::now() - start;
  return dt.count() / reps;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t k = 0; k < a.size(); ++k)
    m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

ImageBuffer random_image(int h, int w, int c, uint64_t seed) {
  ImageBuffer img(h, w, c);
  RngStream rng(seed);
  for (double& v : img.data) v = rng.next_uniform();
  return img;
}

void report(const char* name, double serial_s, double parallel_s, double diff) {
  std::printf("%-18s serial %8.2f ms   parallel %8.2f ms   speedup %5.2fx   "
              "max|diff| %g\n",
              name, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              diff);
}

}  // namespace

int main() {
  const int reps = 5;

  {
    const ImageBuffer img = random_image(720, 960, 1, 1);
    const std::vector<double> k = kernels::gaussian_kernel_1d(3.0);
    const int kh = static_cast<int>(k.size());
    std::vector<double> kernel2d(static_cast<size_t>(kh) * kh);
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kh; ++j) kernel2d[i * kh + j] = k[i] * k[j];
    std::vector<double> out_p(img.data.size()), out_s(img.data.size());
    const double tp = seconds(
        [&] {
          kernels::convolve2d_replicate(img.data.data(), img.height, img.width,
                                        kernel2d.data(), kh, kh, out_p.data());
        },
        reps);
    const double ts = seconds(
        [&] {
          kernels::convolve2d_replicate_serial(img.data.data(), img.height,
                                               img.width, kernel2d.data(), kh,
                                               kh, out_s.data());
        },
        reps);
    report("convolve2d", ts, tp, max_abs_diff(out_p, out_s));
  }

  {
    const int h = 120, w = 160, cin = 8, cout = 8, kh = 3;
    const ImageBuffer in = random_image(h, w * cin, 1, 2);
    std::vector<double> kernel(static_cast<size_t>(kh) * kh * cin * cout);
    RngStream rng(3);
    for (double& v : kernel) v = rng.next_gaussian();
    std::vector<double> out_p(static_cast<size_t>(h) * w * cout);
    std::vector<double> out_s(out_p.size());
    const double tp = seconds(
        [&] {
          kernels::conv2d_forward(in.data.data(), h, w, cin, kernel.data(), kh,
                                  kh, cout, true, out_p.data());
        },
        reps);
    const double ts = seconds(
        [&] {
          kernels::conv2d_forward_serial(in.data.data(), h, w, cin,
                                         kernel.data(), kh, kh, cout, true,
                                         out_s.data());
        },
        reps);
    report("conv2d_forward", ts, tp, max_abs_diff(out_p, out_s));
  }

  {
    const ImageBuffer left = random_image(240, 320, 1, 4);
    ImageBuffer right = left;
    for (int i = 0; i < right.height; ++i)
      for (int j = right.width - 1; j >= 4; --j)
        right.at(i, j, 0) = right.at(i, j - 4, 0);
    std::vector<double> out_p(static_cast<size_t>(left.height) * left.width);
    std::vector<double> out_s(out_p.size());
    const double tp = seconds(
        [&] { kernels::sad_block_match(left, right, 32, 7, out_p.data()); },
        reps);
    const double ts = seconds(
        [&] {
          kernels::sad_block_match_serial(left, right, 32, 7, out_s.data());
        },
        reps);
    report("sad_block_match", ts, tp, max_abs_diff(out_p, out_s));
  }

  return 0;
}
