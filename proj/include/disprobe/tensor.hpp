#pragma once

#include <functional>
#include <numeric>
#include <vector>

#include "disprobe/errors.hpp"

namespace disprobe::diff {

// Dense numeric array, rank <= 4, row-major with the last axis fastest.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    if (shape.size() > 4) throw ShapeError("tensor rank must be <= 4");
    data.assign(count(shape), fill);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (shape.size() > 4) throw ShapeError("tensor rank must be <= 4");
    if (data.size() != count(shape))
      throw ShapeError("tensor data length does not match shape");
  }

  static size_t count(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ShapeError("tensor dims must be positive");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool is_scalar() const { return data.size() == 1; }
};

}  // namespace disprobe::diff
