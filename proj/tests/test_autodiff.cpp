#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "disprobe/errors.hpp"
#include "disprobe/rng.hpp"
#include "disprobe/tape.hpp"

using namespace disprobe;
using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape), 0.0);
  RngStream rng(seed);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("forward values of the primitives") {
  Tape tape;
  const Var a = tape.leaf(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
  const Var b = tape.leaf(Tensor({2, 2}, {0.5, -1.0, 2.0, 0.0}));

  CHECK(tape.value(tape.add(a, b)).data == std::vector<double>{1.5, 1.0, 5.0, 4.0});
  CHECK(tape.value(tape.sub(a, b)).data == std::vector<double>{0.5, 3.0, 1.0, 4.0});
  CHECK(tape.value(tape.mul(a, b)).data == std::vector<double>{0.5, -2.0, 6.0, 0.0});
  CHECK(tape.value(tape.scalar_mul(a, -2.0)).data ==
        std::vector<double>{-2.0, -4.0, -6.0, -8.0});
  CHECK(tape.value(tape.relu(b)).data == std::vector<double>{0.5, 0.0, 2.0, 0.0});
  CHECK(tape.value(tape.abs_(b)).data == std::vector<double>{0.5, 1.0, 2.0, 0.0});
  CHECK(tape.value(tape.mean_all(a)).data[0] == doctest::Approx(2.5));
  CHECK(tape.value(tape.sum_axis(a, 1)).data == std::vector<double>{3.0, 7.0});
  CHECK(tape.value(tape.sum_axis(a, 0)).data == std::vector<double>{4.0, 6.0});
  CHECK(tape.value(tape.sigmoid(tape.leaf(Tensor({1}, 0.0)))).data[0] ==
        doctest::Approx(0.5));
}

TEST_CASE("softmax is normalized and overflow-stable") {
  Tape tape;
  const Var x = tape.leaf(Tensor({2, 3}, {1000.0, 1001.0, 999.0, -5.0, 0.0, 5.0}));
  const Tensor& p = tape.value(tape.softmax_axis(x, 1));
  for (double v : p.data) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
  CHECK(p.data[0] + p.data[1] + p.data[2] == doctest::Approx(1.0));
  CHECK(p.data[3] + p.data[4] + p.data[5] == doctest::Approx(1.0));
  CHECK(p.data[1] > p.data[0]);
}

TEST_CASE("weighted_sum computes an expectation") {
  Tape tape;
  const Var p = tape.leaf(Tensor({1, 4}, {0.1, 0.2, 0.3, 0.4}));
  const Tensor& e = tape.value(tape.weighted_sum(p, {0.0, 1.0, 2.0, 3.0}, 1));
  CHECK(e.data[0] == doctest::Approx(2.0));
}

TEST_CASE("shift_horizontal clamps at the border") {
  Tape tape;
  const Var x = tape.leaf(Tensor({1, 3, 1}, {1.0, 2.0, 3.0}));
  CHECK(tape.value(tape.shift_horizontal(x, 1)).data ==
        std::vector<double>{1.0, 1.0, 2.0});
  CHECK(tape.value(tape.shift_horizontal(x, 2)).data ==
        std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("stack_last builds a trailing axis") {
  Tape tape;
  const Var a = tape.leaf(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
  const Var b = tape.leaf(Tensor({2, 2}, {5.0, 6.0, 7.0, 8.0}));
  const Tensor& s = tape.value(tape.stack_last({a, b}));
  CHECK(s.shape == std::vector<int>{2, 2, 2});
  CHECK(s.data == std::vector<double>{1.0, 5.0, 2.0, 6.0, 3.0, 7.0, 4.0, 8.0});
}

TEST_CASE("grad_check passes for every smooth primitive") {
  const double tol = 1e-6;
  const Tensor x = random_tensor({3, 4}, 1, 0.2, 1.5);  // positive, for log

  auto check = [&](const char* name,
                   const std::function<Var(Tape&, Var)>& fn) {
    INFO(name);
    CHECK(diff::grad_check(fn, x, 1e-5) < tol);
  };

  check("add", [](Tape& t, Var v) {
    return t.mean_all(t.add(v, t.mul(v, v)));
  });
  check("sub_scalar_mul", [](Tape& t, Var v) {
    return t.mean_all(t.sub(t.scalar_mul(v, 3.0), v));
  });
  check("mul", [](Tape& t, Var v) { return t.mean_all(t.mul(v, v)); });
  check("exp", [](Tape& t, Var v) { return t.mean_all(t.exp_(v)); });
  check("log", [](Tape& t, Var v) { return t.mean_all(t.log_(v)); });
  check("sigmoid", [](Tape& t, Var v) { return t.mean_all(t.sigmoid(v)); });
  check("sum_axis", [](Tape& t, Var v) {
    return t.mean_all(t.mul(t.sum_axis(v, 1), t.sum_axis(v, 1)));
  });
  check("softmax", [](Tape& t, Var v) {
    return t.mean_all(t.mul(t.softmax_axis(v, 1), t.softmax_axis(v, 0)));
  });
  check("weighted_sum", [](Tape& t, Var v) {
    const Var w = t.weighted_sum(v, {0.5, -1.0, 2.0, 0.25}, 1);
    return t.mean_all(t.mul(w, w));
  });
  check("shift", [](Tape& t, Var v) {
    // promote to rank-3 via stack for the width-axis shift
    const Var s = t.stack_last({v, v});
    return t.mean_all(t.mul(t.shift_horizontal(s, 1), s));
  });
}

TEST_CASE("grad_check passes for conv2d") {
  const Tensor input = random_tensor({5, 6, 2}, 2);
  const Tensor kernel = random_tensor({3, 3, 2, 3}, 3);
  for (bool padded : {true, false}) {
    const double err = diff::grad_check(
        [&](Tape& t, Var v) {
          const Var k = t.leaf(kernel, false);
          const Var y = t.conv2d(v, k, padded);
          return t.mean_all(t.mul(y, y));
        },
        input, 1e-5);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("relu and abs subgradients are 0 at 0") {
  Tape tape;
  const Var x = tape.leaf(Tensor({3}, {-1.0, 0.0, 2.0}), true);
  const Var loss = tape.mean_all(tape.add(tape.relu(x), tape.abs_(x)));
  tape.backward(loss);
  const Tensor& g = tape.grad(x);
  CHECK(g.data[0] == doctest::Approx(-1.0 / 3.0));  // abs only
  CHECK(g.data[1] == 0.0);
  CHECK(g.data[2] == doctest::Approx(2.0 / 3.0));   // relu + abs
}

TEST_CASE("gradients accumulate across fan-out") {
  Tape tape;
  const Var x = tape.leaf(Tensor({1}, 3.0), true);
  const Var y = tape.add(tape.mul(x, x), x);  // y = x^2 + x, dy/dx = 7
  tape.backward(tape.mean_all(y));
  CHECK(tape.grad(x).data[0] == doctest::Approx(7.0));
}

TEST_CASE("tape misuse raises StateError") {
  Tape tape;
  const Var x = tape.leaf(Tensor({2}, 1.0), true);
  const Var loss = tape.mean_all(x);
  CHECK_THROWS_AS(tape.grad(x), StateError);  // before backward
  tape.backward(loss);
  CHECK_NOTHROW(tape.grad(x));
  CHECK_THROWS_AS(tape.backward(loss), StateError);  // reuse
}

TEST_CASE("backward requires a scalar output") {
  Tape tape;
  const Var x = tape.leaf(Tensor({2}, 1.0), true);
  CHECK_THROWS_AS(tape.backward(x), ShapeError);
}

TEST_CASE("shape mismatches are rejected") {
  Tape tape;
  const Var a = tape.leaf(Tensor({2, 2}, 1.0));
  const Var b = tape.leaf(Tensor({2, 3}, 1.0));
  CHECK_THROWS_AS(tape.add(a, b), ShapeError);
  CHECK_THROWS_AS(tape.stack_last({a, b}), ShapeError);
}
