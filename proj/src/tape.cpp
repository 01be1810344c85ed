#include "disprobe/tape.hpp"

#include <algorithm>
#include <cmath>

#include "disprobe/kernels.hpp"

namespace disprobe::diff {

namespace {

// Decomposes a shape around `axis` into [outer, len, inner].
struct AxisView {
  size_t outer, len, inner;
};

AxisView axis_view(const std::vector<int>& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw ShapeError("axis out of range");
  AxisView v{1, static_cast<size_t>(shape[axis]), 1};
  for (int i = 0; i < axis; ++i) v.outer *= shape[i];
  for (size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

void Tape::check(Var v) const {
  if (v < 0 || v >= static_cast<int>(nodes_.size()))
    throw StateError("variable does not belong to this tape");
}

Var Tape::push(Tensor value, bool requires_grad,
               std::function<void()> backprop) {
  if (backward_done_)
    throw StateError("tape already swept; use a fresh tape");
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad,
                        std::move(backprop)});
  return static_cast<Var>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(Var v) {
  Node& n = nodes_[v];
  if (n.grad.data.empty()) n.grad = Tensor(n.value.shape, 0.0);
  return n.grad;
}

const Tensor& Tape::grad(Var v) const {
  check(v);
  if (!backward_done_) throw StateError("backward has not run");
  if (nodes_[v].grad.data.empty())
    throw StateError("no gradient recorded for this variable");
  return nodes_[v].grad;
}

double Tape::scalar(Var v) const {
  check(v);
  if (!nodes_[v].value.is_scalar()) throw ShapeError("value is not scalar");
  return nodes_[v].value.data[0];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  if (!value(a).same_shape(value(b))) throw ShapeError("add: shape mismatch");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, b, y] {
      const Tensor& g = nodes_[y].grad;
      if (requires_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (requires_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i];
      }
    };
  return y;
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  if (!value(a).same_shape(value(b))) throw ShapeError("sub: shape mismatch");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] -= vb.data[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, b, y] {
      const Tensor& g = nodes_[y].grad;
      if (requires_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (requires_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
      }
    };
  return y;
}

Var Tape::mul(Var a, Var b) {
  check(a);
  check(b);
  if (!value(a).same_shape(value(b))) throw ShapeError("mul: shape mismatch");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] *= vb.data[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, b, y] {
      const Tensor& g = nodes_[y].grad;
      const Tensor& va = nodes_[a].value;
      const Tensor& vb2 = nodes_[b].value;
      if (requires_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (size_t i = 0; i < g.size(); ++i)
          ga.data[i] += g.data[i] * vb2.data[i];
      }
      if (requires_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (size_t i = 0; i < g.size(); ++i)
          gb.data[i] += g.data[i] * va.data[i];
      }
    };
  return y;
}

Var Tape::scalar_mul(Var a, double s) {
  check(a);
  Tensor out = value(a);
  for (double& v : out.data) v *= s;
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, s, y] {
      const Tensor& g = nodes_[y].grad;
      Tensor& ga = grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i) ga.data[i] += s * g.data[i];
    };
  return y;
}

Var Tape::relu(Var a) {
  check(a);
  Tensor out = value(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, y] {
      const Tensor& g = nodes_[y].grad;
      const Tensor& va = nodes_[a].value;
      Tensor& ga = grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i)
        if (va.data[i] > 0.0) ga.data[i] += g.data[i];
    };
  return y;
}

Var Tape::exp_(Var a) {
  check(a);
  Tensor out = value(a);
  for (double& v : out.data) v = std::exp(v);
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, y] {
      const Tensor& g = nodes_[y].grad;
      const Tensor& vy = nodes_[y].value;
      Tensor& ga = grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i)
        ga.data[i] += g.data[i] * vy.data[i];
    };
  return y;
}

Var Tape::log_(Var a) {
  check(a);
  Tensor out = value(a);
  for (double& v : out.data) v = std::log(v);
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, y] {
      const Tensor& g = nodes_[y].grad;
      const Tensor& va = nodes_[a].value;
      Tensor& ga = grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i)
        ga.data[i] += g.data[i] / va.data[i];
    };
  return y;
}

Var Tape::abs_(Var a) {
  check(a);
  Tensor out = value(a);
  for (double& v : out.data) v = std::abs(v);
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, y] {
      const Tensor& g = nodes_[y].grad;
      const Tensor& va = nodes_[a].value;
      Tensor& ga = grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i) {
        if (va.data[i] > 0.0)
          ga.data[i] += g.data[i];
        else if (va.data[i] < 0.0)
          ga.data[i] -= g.data[i];
      }
    };
  return y;
}

Var Tape::sigmoid(Var a) {
  check(a);
  Tensor out = value(a);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, y] {
      const Tensor& g = nodes_[y].grad;
      const Tensor& vy = nodes_[y].value;
      Tensor& ga = grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i)
        ga.data[i] += g.data[i] * vy.data[i] * (1.0 - vy.data[i]);
    };
  return y;
}

Var Tape::sum_axis(Var a, int axis) {
  check(a);
  const Tensor& va = value(a);
  AxisView v = axis_view(va.shape, axis);
  std::vector<int> out_shape;
  for (int i = 0; i < va.rank(); ++i)
    if (i != axis) out_shape.push_back(va.shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape, 0.0);
  for (size_t o = 0; o < v.outer; ++o)
    for (size_t k = 0; k < v.len; ++k)
      for (size_t i = 0; i < v.inner; ++i)
        out.data[o * v.inner + i] +=
            va.data[(o * v.len + k) * v.inner + i];
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, v, y] {
      const Tensor& g = nodes_[y].grad;
      Tensor& ga = grad_buf(a);
      for (size_t o = 0; o < v.outer; ++o)
        for (size_t k = 0; k < v.len; ++k)
          for (size_t i = 0; i < v.inner; ++i)
            ga.data[(o * v.len + k) * v.inner + i] += g.data[o * v.inner + i];
    };
  return y;
}

Var Tape::softmax_axis(Var a, int axis) {
  check(a);
  const Tensor& va = value(a);
  AxisView v = axis_view(va.shape, axis);
  Tensor out(va.shape, 0.0);
  for (size_t o = 0; o < v.outer; ++o)
    for (size_t i = 0; i < v.inner; ++i) {
      double mx = -1e300;
      for (size_t k = 0; k < v.len; ++k)
        mx = std::max(mx, va.data[(o * v.len + k) * v.inner + i]);
      double sum = 0.0;
      for (size_t k = 0; k < v.len; ++k) {
        const double e = std::exp(va.data[(o * v.len + k) * v.inner + i] - mx);
        out.data[(o * v.len + k) * v.inner + i] = e;
        sum += e;
      }
      for (size_t k = 0; k < v.len; ++k)
        out.data[(o * v.len + k) * v.inner + i] /= sum;
    }
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, v, y] {
      const Tensor& g = nodes_[y].grad;
      const Tensor& p = nodes_[y].value;
      Tensor& ga = grad_buf(a);
      for (size_t o = 0; o < v.outer; ++o)
        for (size_t i = 0; i < v.inner; ++i) {
          double dot = 0.0;
          for (size_t k = 0; k < v.len; ++k) {
            const size_t idx = (o * v.len + k) * v.inner + i;
            dot += g.data[idx] * p.data[idx];
          }
          for (size_t k = 0; k < v.len; ++k) {
            const size_t idx = (o * v.len + k) * v.inner + i;
            ga.data[idx] += p.data[idx] * (g.data[idx] - dot);
          }
        }
    };
  return y;
}

Var Tape::mean_all(Var a) {
  check(a);
  const Tensor& va = value(a);
  double acc = 0.0;
  for (double v : va.data) acc += v;
  const double n = static_cast<double>(va.size());
  Tensor out({1}, std::vector<double>{acc / n});
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, n, y] {
      const double g = nodes_[y].grad.data[0] / n;
      Tensor& ga = grad_buf(a);
      for (double& v : ga.data) v += g;
    };
  return y;
}

Var Tape::weighted_sum(Var a, const std::vector<double>& weights, int axis) {
  check(a);
  const Tensor& va = value(a);
  AxisView v = axis_view(va.shape, axis);
  if (weights.size() != v.len)
    throw ShapeError("weighted_sum: weight count does not match axis length");
  std::vector<int> out_shape;
  for (int i = 0; i < va.rank(); ++i)
    if (i != axis) out_shape.push_back(va.shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape, 0.0);
  for (size_t o = 0; o < v.outer; ++o)
    for (size_t k = 0; k < v.len; ++k)
      for (size_t i = 0; i < v.inner; ++i)
        out.data[o * v.inner + i] +=
            weights[k] * va.data[(o * v.len + k) * v.inner + i];
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, v, weights, y] {
      const Tensor& g = nodes_[y].grad;
      Tensor& ga = grad_buf(a);
      for (size_t o = 0; o < v.outer; ++o)
        for (size_t k = 0; k < v.len; ++k)
          for (size_t i = 0; i < v.inner; ++i)
            ga.data[(o * v.len + k) * v.inner + i] +=
                weights[k] * g.data[o * v.inner + i];
    };
  return y;
}

Var Tape::conv2d(Var input, Var kernel, bool same_padding) {
  check(input);
  check(kernel);
  const Tensor& vi = value(input);
  const Tensor& vk = value(kernel);
  if (vi.rank() != 3 || vk.rank() != 4)
    throw ShapeError("conv2d: input must be HxWxC, kernel KHxKWxCinxCout");
  const int h = vi.shape[0], w = vi.shape[1], cin = vi.shape[2];
  const int kh = vk.shape[0], kw = vk.shape[1], cout = vk.shape[3];
  if (vk.shape[2] != cin)
    throw ShapeError("conv2d: kernel input channels mismatch");
  const int oh = same_padding ? h : h - kh + 1;
  const int ow = same_padding ? w : w - kw + 1;
  if (oh < 1 || ow < 1) throw ShapeError("conv2d: input smaller than kernel");

  Tensor out({oh, ow, cout}, 0.0);
  kernels::conv2d_forward(vi.data.data(), h, w, cin, vk.data.data(), kh, kw,
                          cout, same_padding, out.data.data());
  bool rg = requires_grad(input) || requires_grad(kernel);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, input, kernel, h, w, cin, kh, kw, cout,
                          same_padding, y] {
      const Tensor& g = nodes_[y].grad;
      if (requires_grad(input)) {
        Tensor gi({h, w, cin}, 0.0);
        kernels::conv2d_backward_input(g.data.data(), h, w, cin,
                                       nodes_[kernel].value.data.data(), kh,
                                       kw, cout, same_padding, gi.data.data());
        Tensor& ga = grad_buf(input);
        for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += gi.data[i];
      }
      if (requires_grad(kernel)) {
        Tensor gk({kh, kw, cin, cout}, 0.0);
        kernels::conv2d_backward_kernel(nodes_[input].value.data.data(),
                                        g.data.data(), h, w, cin, kh, kw, cout,
                                        same_padding, gk.data.data());
        Tensor& ga = grad_buf(kernel);
        for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += gk.data[i];
      }
    };
  return y;
}

Var Tape::shift_horizontal(Var a, int d) {
  check(a);
  const Tensor& va = value(a);
  if (va.rank() != 3) throw ShapeError("shift_horizontal: expects HxWxC");
  const int h = va.shape[0], w = va.shape[1], c = va.shape[2];
  Tensor out(va.shape, 0.0);
  for (int y0 = 0; y0 < h; ++y0)
    for (int x = 0; x < w; ++x) {
      const int sx = std::clamp(x - d, 0, w - 1);
      for (int ch = 0; ch < c; ++ch)
        out.data[(static_cast<size_t>(y0) * w + x) * c + ch] =
            va.data[(static_cast<size_t>(y0) * w + sx) * c + ch];
    }
  bool rg = requires_grad(a);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, a, d, h, w, c, y] {
      const Tensor& g = nodes_[y].grad;
      Tensor& ga = grad_buf(a);
      for (int y0 = 0; y0 < h; ++y0)
        for (int x = 0; x < w; ++x) {
          const int sx = std::clamp(x - d, 0, w - 1);
          for (int ch = 0; ch < c; ++ch)
            ga.data[(static_cast<size_t>(y0) * w + sx) * c + ch] +=
                g.data[(static_cast<size_t>(y0) * w + x) * c + ch];
        }
    };
  return y;
}

Var Tape::stack_last(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("stack_last: no inputs");
  for (Var p : parts) check(p);
  const Tensor& first = value(parts[0]);
  for (Var p : parts)
    if (!value(p).same_shape(first))
      throw ShapeError("stack_last: shape mismatch");
  if (first.rank() >= 4) throw ShapeError("stack_last: rank would exceed 4");

  const size_t n = parts.size();
  std::vector<int> out_shape = first.shape;
  out_shape.push_back(static_cast<int>(n));
  Tensor out(out_shape, 0.0);
  const size_t elems = first.size();
  for (size_t p = 0; p < n; ++p) {
    const Tensor& vp = value(parts[p]);
    for (size_t i = 0; i < elems; ++i) out.data[i * n + p] = vp.data[i];
  }
  bool rg = false;
  for (Var p : parts) rg = rg || requires_grad(p);
  Var y = push(std::move(out), rg, nullptr);
  if (rg)
    nodes_[y].backprop = [this, parts, elems, n, y] {
      const Tensor& g = nodes_[y].grad;
      for (size_t p = 0; p < n; ++p) {
        if (!requires_grad(parts[p])) continue;
        Tensor& ga = grad_buf(parts[p]);
        for (size_t i = 0; i < elems; ++i) ga.data[i] += g.data[i * n + p];
      }
    };
  return y;
}

void Tape::backward(Var output) {
  check(output);
  if (backward_done_) throw StateError("backward already ran on this tape");
  if (!nodes_[output].value.is_scalar())
    throw ShapeError("backward: output must be scalar");
  grad_buf(output).data[0] = 1.0;
  for (int v = output; v >= 0; --v)
    if (nodes_[v].backprop && !nodes_[v].grad.data.empty()) nodes_[v].backprop();
  backward_done_ = true;
}

double grad_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& input,
                  double fd_step) {
  if (fd_step <= 0.0) throw ConfigError("grad_check: fd_step must be > 0");

  Tape tape;
  Var x = tape.leaf(input, true);
  Var out = fn(tape, x);
  tape.backward(out);
  const Tensor autodiff = tape.grad(x);

  auto eval = [&](const Tensor& t) {
    Tape fresh;
    Var leaf = fresh.leaf(t, false);
    return fresh.scalar(fn(fresh, leaf));
  };

  double max_err = 0.0;
  Tensor probe = input;
  for (size_t i = 0; i < input.size(); ++i) {
    const double orig = probe.data[i];
    probe.data[i] = orig + fd_step;
    const double fp = eval(probe);
    probe.data[i] = orig - fd_step;
    const double fm = eval(probe);
    probe.data[i] = orig;
    const double cd = (fp - fm) / (2.0 * fd_step);
    const double err =
        std::abs(autodiff.data[i] - cd) / std::max(1.0, std::abs(cd));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace disprobe::diff
