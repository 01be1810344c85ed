#pragma once

#include <functional>
#include <vector>

#include "disprobe/tensor.hpp"

namespace disprobe::diff {

using Var = int;

// Reverse-mode tape. Records every primitive application in order; one
// reverse sweep propagates gradients from a scalar output to every leaf
// marked requires-grad. A tape is single-owner: independent evaluations use
// independent tapes.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scalar_mul(Var a, double s);
  Var relu(Var a);  // subgradient at 0 is 0
  Var exp_(Var a);
  Var log_(Var a);
  Var abs_(Var a);  // subgradient at 0 is 0
  Var sigmoid(Var a);
  Var sum_axis(Var a, int axis);
  Var softmax_axis(Var a, int axis);
  Var mean_all(Var a);  // scalar output, double accumulation
  // sum over `axis` of weights[k] * x[...,k,...]; weights.size() == dim(axis)
  Var weighted_sum(Var a, const std::vector<double>& weights, int axis);
  // input H x W x Cin, kernel KH x KW x Cin x Cout, stride 1
  Var conv2d(Var input, Var kernel, bool same_padding);
  // along the width axis of an H x W x C tensor; edge clamp
  Var shift_horizontal(Var a, int d);
  // n same-shaped tensors -> shape + [n]
  Var stack_last(const std::vector<Var>& parts);

  void backward(Var output);  // ShapeError unless output is scalar

  const Tensor& value(Var v) const { return nodes_[v].value; }
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v].requires_grad; }
  double scalar(Var v) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> backprop;  // empty for leaves
  };

  Var push(Tensor value, bool requires_grad, std::function<void()> backprop);
  Tensor& grad_buf(Var v);
  void check(Var v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Max over components of |autodiff - central difference| / max(1, |cd|),
// for a tensor->scalar function built on a fresh tape per evaluation.
double grad_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& input,
                  double fd_step);

}  // namespace disprobe::diff
