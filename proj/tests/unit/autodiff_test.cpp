#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "cardiolabel/autodiff.hpp"
#include "cardiolabel/tensor.hpp"

using namespace cardiolabel;

namespace {

void fill_uniform(Tensor& t, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
}

ParamTensor make_param(const std::string& name, std::vector<std::int64_t> shape, std::uint64_t seed) {
  ParamTensor p(name, Tensor(std::move(shape)));
  fill_uniform(p.value, seed);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("conv2d matches hand-computed cross-correlation") {
  // x = 1..9 as 3x3, k = [[1,2],[3,4]]; out[i][j] = sum x[i+di][j+dj] k[di][dj]
  Trace t;
  Var x = t.input(Tensor({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
  ParamTensor k("k", Tensor({2, 2, 1, 1}, {1, 2, 3, 4}));
  ParamTensor b("b", Tensor({1}, {0.5}));
  Var y = t.conv2d(x, t.param(k), t.param(b), 1, 0);
  CHECK(y.value().shape() == std::vector<std::int64_t>{2, 2, 1});
  CHECK(y.value()[0] == doctest::Approx(37.5).epsilon(1e-12));
  CHECK(y.value()[1] == doctest::Approx(47.5).epsilon(1e-12));
  CHECK(y.value()[2] == doctest::Approx(67.5).epsilon(1e-12));
  CHECK(y.value()[3] == doctest::Approx(77.5).epsilon(1e-12));
}

TEST_CASE("conv2d stride 2 pad 1 matches hand-computed values") {
  Trace t;
  Var x = t.input(Tensor({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
  ParamTensor k("k", Tensor({2, 2, 1, 1}, {1, 2, 3, 4}));
  ParamTensor b("b", Tensor({1}, {0.0}));
  Var y = t.conv2d(x, t.param(k), t.param(b), 2, 1);
  CHECK(y.value().shape() == std::vector<std::int64_t>{2, 2, 1});
  CHECK(y.value()[0] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(y.value()[1] == doctest::Approx(18.0).epsilon(1e-12));
  CHECK(y.value()[2] == doctest::Approx(36.0).epsilon(1e-12));
  CHECK(y.value()[3] == doctest::Approx(77.0).epsilon(1e-12));
}

TEST_CASE("conv2d output dims follow the floor law") {
  for (int h = 4; h <= 9; ++h) {
    for (int kh = 1; kh <= 3; ++kh) {
      for (int stride = 1; stride <= 3; ++stride) {
        for (int pad = 0; pad <= 2; ++pad) {
          Trace t;
          Tensor xv({h, h + 1, 2});
          fill_uniform(xv, 7);
          ParamTensor k("k", Tensor({kh, kh, 2, 3}));
          ParamTensor b("b", Tensor({3}));
          Var y = t.conv2d(t.input(xv), t.param(k), t.param(b), stride, pad);
          const std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
          const std::int64_t ow = (h + 1 + 2 * pad - kh) / stride + 1;
          CHECK(y.value().shape() == std::vector<std::int64_t>{oh, ow, 3});
        }
      }
    }
  }
}

TEST_CASE("rank-4 conv equals per-image rank-3 conv") {
  Tensor xv({3, 5, 6, 2});
  fill_uniform(xv, 11);
  ParamTensor k = make_param("k", {3, 3, 2, 4}, 12);
  ParamTensor b = make_param("b", {4}, 13);

  Trace tb;
  Var yb = tb.conv2d(tb.input(xv), tb.param(k), tb.param(b), 2, 1);
  CHECK(yb.value().shape() == std::vector<std::int64_t>{3, 3, 3, 4});

  for (std::int64_t n = 0; n < 3; ++n) {
    Tensor xi({5, 6, 2});
    std::copy(xv.data() + n * 60, xv.data() + (n + 1) * 60, xi.data());
    Trace ts;
    Var ys = ts.conv2d(ts.input(xi), ts.param(k), ts.param(b), 2, 1);
    const std::int64_t sz = ys.value().size();
    // GEMM blocking differs between the two shapes, so match to fp tolerance
    for (std::int64_t i = 0; i < sz; ++i) CHECK(yb.value()[n * sz + i] == doctest::Approx(ys.value()[i]).epsilon(1e-12));
  }
}

TEST_CASE("relu clamps negatives and gates the gradient") {
  Trace t;
  Var x = t.input(Tensor({4}, {-2.0, -0.5, 0.0, 3.0}));
  Var y = t.relu(x);
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == 0.0);
  CHECK(y.value()[2] == 0.0);
  CHECK(y.value()[3] == 3.0);
  Var s = t.pick(y, 3);
  t.backward(s);
  CHECK(x.grad()[3] == 1.0);
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("avg_pool2 averages each 2x2 cell") {
  Trace t;
  Var x = t.input(Tensor({2, 2, 1}, {1, 2, 3, 4}));
  Var y = t.avg_pool2(x);
  CHECK(y.value().shape() == std::vector<std::int64_t>{1, 1, 1});
  CHECK(y.value()[0] == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("avg_pool2 rejects odd spatial dims") {
  Trace t;
  Var x = t.input(Tensor({3, 4, 1}));
  CHECK_THROWS_AS(t.avg_pool2(x), std::runtime_error);
}

TEST_CASE("global_avg_pool reduces spatial axes") {
  Trace t;
  Var x = t.input(Tensor({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  Var y = t.global_avg_pool(x);
  CHECK(y.value().shape() == std::vector<std::int64_t>{2});
  CHECK(y.value()[0] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(y.value()[1] == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("linear affine map matches hand computation") {
  Trace t;
  Var x = t.input(Tensor({3}, {1.0, -2.0, 0.5}));
  ParamTensor w("w", Tensor({3, 2}, {1, 0, 2, -1, 0, 4}));
  ParamTensor b("b", Tensor({2}, {0.25, -0.5}));
  Var y = t.linear(x, t.param(w), t.param(b));
  CHECK(y.value()[0] == doctest::Approx(-2.75).epsilon(1e-12));
  CHECK(y.value()[1] == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("concat lays blocks along the chosen axis") {
  Trace t;
  Var a = t.input(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = t.input(Tensor({2, 1}, {9, 10}));
  Var y = t.concat({a, b}, 1);
  CHECK(y.value().shape() == std::vector<std::int64_t>{2, 3});
  CHECK(y.value().values() == std::vector<double>{1, 2, 9, 3, 4, 10});

  Var z = t.concat({a, a}, 0);
  CHECK(z.value().shape() == std::vector<std::int64_t>{4, 2});
  CHECK(z.value().values() == std::vector<double>{1, 2, 3, 4, 1, 2, 3, 4});
}

TEST_CASE("stack_channels interleaves segment maps on the channel axis") {
  Trace t;
  // two segments, 1x2 spatial, 2 channels each
  Var x = t.input(Tensor({2, 1, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  Var y = t.stack_channels(x);
  CHECK(y.value().shape() == std::vector<std::int64_t>{1, 2, 4});
  // pixel (0,0): seg0 {1,2} then seg1 {5,6}; pixel (0,1): {3,4},{7,8}
  CHECK(y.value().values() == std::vector<double>{1, 2, 5, 6, 3, 4, 7, 8});
}

TEST_CASE("softmax_cross_entropy frozen values") {
  {
    Trace t;
    Var z = t.input(Tensor({4}, {0.0, 0.0, 0.0, 0.0}));
    Var l = t.softmax_cross_entropy(z, 2);
    CHECK(l.value().item() == doctest::Approx(1.3862943611198906).epsilon(1e-14));
  }
  {
    Trace t;
    Var z = t.input(Tensor({3}, {10.0, 0.0, 0.0}));
    Var l = t.softmax_cross_entropy(z, 0);
    CHECK(l.value().item() == doctest::Approx(9.079573746717529e-05).epsilon(1e-10));
    t.backward(l);
    CHECK(z.grad()[0] == doctest::Approx(0.999909208384341 - 1.0).epsilon(1e-10));
    CHECK(z.grad()[1] == doctest::Approx(4.5395807829510914e-05).epsilon(1e-10));
    CHECK(z.grad()[2] == doctest::Approx(4.5395807829510914e-05).epsilon(1e-10));
  }
}

TEST_CASE("softmax_cross_entropy survives extreme logits") {
  Trace t;
  Var z = t.input(Tensor({3}, {1e6, -1e6, 0.0}));
  Var l = t.softmax_cross_entropy(z, 1);
  CHECK(std::isfinite(l.value().item()));
  CHECK(l.value().item() == doctest::Approx(2e6).epsilon(1e-9));
  t.backward(l);
  for (std::int64_t i = 0; i < 3; ++i) CHECK(std::isfinite(z.grad()[i]));
}

TEST_CASE("sigmoid_bce frozen values and gradient") {
  {
    Trace t;
    Var z = t.input(Tensor({1}, {20.0}));
    Var tt = t.input(Tensor({1}, {1.0}));
    Var l = t.sigmoid_bce(z, tt);
    CHECK(l.value().item() == doctest::Approx(2.061153620314381e-09).epsilon(1e-9));
  }
  {
    Trace t;
    Var z = t.input(Tensor({3}, {0.5, -1.25, 3.0}));
    Var tt = t.input(Tensor({3}, {0.3, 1.0, 0.0}));
    Var l = t.sigmoid_bce(z, tt);
    CHECK(l.value().item() == doctest::Approx(1.791531139033074).epsilon(1e-13));
    t.backward(l);
    CHECK(z.grad()[0] == doctest::Approx(0.10748644373395154).epsilon(1e-12));
    CHECK(z.grad()[1] == doctest::Approx(-0.2590999537248971).epsilon(1e-12));
    CHECK(z.grad()[2] == doctest::Approx(0.31752470894081114).epsilon(1e-12));
  }
}

TEST_CASE("sigmoid_bce survives extreme logits") {
  Trace t;
  Var z = t.input(Tensor({2}, {1e6, -1e6}));
  Var tt = t.input(Tensor({2}, {0.0, 1.0}));
  Var l = t.sigmoid_bce(z, tt);
  CHECK(std::isfinite(l.value().item()));
  CHECK(l.value().item() == doctest::Approx(1e6).epsilon(1e-9));
  t.backward(l);
  CHECK(std::isfinite(z.grad()[0]));
  CHECK(std::isfinite(z.grad()[1]));
}

TEST_CASE("softmax normalizes and backpropagates") {
  Trace t;
  Var z = t.input(Tensor({3}, {1.0, 2.0, 3.0}));
  Var p = t.softmax(z);
  double sum = 0.0;
  for (std::int64_t i = 0; i < 3; ++i) sum += p.value()[i];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.value()[2] > p.value()[1]);
  Var s = t.pick(p, 0);
  t.backward(s);
  // d p0 / d z0 = p0 (1 - p0)
  const double p0 = p.value()[0];
  CHECK(z.grad()[0] == doctest::Approx(p0 * (1 - p0)).epsilon(1e-12));
}

TEST_CASE("param rebinding returns the same node and accumulates all uses") {
  ParamTensor p("p", Tensor({2}, {3.0, -1.0}));
  Trace t;
  Var a = t.param(p);
  Var b = t.param(p);
  CHECK(a.id == b.id);
  // loss = p[0] + 2 p[0] through two uses of the same node
  Var loss = t.pick(t.add(a, t.scale(b, 2.0)), 0);
  p.zero_grad();
  t.backward(loss);
  CHECK(p.grad[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(p.grad[1] == 0.0);
}

TEST_CASE("backward runs once per trace") {
  Trace t;
  Var x = t.input(Tensor({2}, {1.0, 2.0}));
  Var l = t.pick(x, 0);
  t.backward(l);
  CHECK_THROWS_AS(t.backward(l), std::runtime_error);
}

TEST_CASE("backward rejects non-scalar targets") {
  Trace t;
  Var x = t.input(Tensor({2}, {1.0, 2.0}));
  CHECK_THROWS_AS(t.backward(x), std::runtime_error);
}

TEST_CASE("dense_block grows channels by depth times growth") {
  ParamTensor k1 = make_param("k1", {3, 3, 2, 3}, 21);
  ParamTensor b1 = make_param("b1", {3}, 22);
  ParamTensor k2 = make_param("k2", {3, 3, 5, 3}, 23);
  ParamTensor b2 = make_param("b2", {3}, 24);
  Tensor xv({4, 4, 2});
  fill_uniform(xv, 25);

  Trace t;
  std::vector<ConvVars> layers{{t.param(k1), t.param(b1)}, {t.param(k2), t.param(b2)}};
  Var y = t.dense_block(t.input(xv), layers);
  CHECK(y.value().shape() == std::vector<std::int64_t>{4, 4, 8});

  // equivalent hand-wired chain
  Trace t2;
  Var x2 = t2.input(xv);
  Var h1 = t2.conv2d(t2.relu(x2), t2.param(k1), t2.param(b1), 1, 1);
  Var c1 = t2.concat({x2, h1}, 2);
  Var h2 = t2.conv2d(t2.relu(c1), t2.param(k2), t2.param(b2), 1, 1);
  Var c2 = t2.concat({c1, h2}, 2);
  for (std::int64_t i = 0; i < y.value().size(); ++i) CHECK(y.value()[i] == c2.value()[i]);
}

TEST_CASE("gradients are bitwise reproducible across runs") {
  ParamTensor k = make_param("k", {3, 3, 1, 2}, 31);
  ParamTensor b = make_param("b", {2}, 32);
  Tensor xv({6, 6, 1});
  fill_uniform(xv, 33);

  std::vector<double> first;
  for (int run = 0; run < 2; ++run) {
    k.zero_grad();
    b.zero_grad();
    Trace t;
    Var y = t.conv2d(t.input(xv), t.param(k), t.param(b), 1, 1);
    Var l = t.sigmoid_bce(t.flatten(y), t.input(Tensor::full({72}, 0.5)));
    t.backward(l);
    if (run == 0) {
      first = k.grad.values();
      first.insert(first.end(), b.grad.values().begin(), b.grad.values().end());
    } else {
      std::vector<double> second = k.grad.values();
      second.insert(second.end(), b.grad.values().begin(), b.grad.values().end());
      CHECK(first == second);
    }
  }
}

TEST_CASE("grad_check validates every op against central differences") {
  const double tol = 1e-6;

  SUBCASE("conv relu pool chain") {
    ParamTensor k = make_param("k", {3, 3, 2, 3}, 41);
    ParamTensor b = make_param("b", {3}, 42);
    Tensor xv({4, 4, 2});
    fill_uniform(xv, 43);
    std::vector<ParamTensor*> ps{&k, &b};
    auto build = [&](Trace& t) {
      Var y = t.avg_pool2(t.relu(t.conv2d(t.input(xv), t.param(k), t.param(b), 1, 1)));
      return t.sigmoid_bce(t.flatten(y), t.input(Tensor::full({12}, 0.25)));
    };
    CHECK(grad_check(build, ps) < tol);
  }

  SUBCASE("strided padded conv") {
    ParamTensor k = make_param("k", {2, 2, 1, 2}, 44);
    ParamTensor b = make_param("b", {2}, 45);
    Tensor xv({5, 5, 1});
    fill_uniform(xv, 46);
    std::vector<ParamTensor*> ps{&k, &b};
    auto build = [&](Trace& t) {
      Var y = t.conv2d(t.input(xv), t.param(k), t.param(b), 2, 1);
      return t.sigmoid_bce(t.flatten(y), t.input(Tensor::full({18}, 0.75)));
    };
    CHECK(grad_check(build, ps) < tol);
  }

  SUBCASE("batched conv with stack_channels and merge") {
    ParamTensor k = make_param("k", {3, 3, 1, 2}, 47);
    ParamTensor b = make_param("b", {2}, 48);
    ParamTensor mk = make_param("mk", {1, 1, 6, 2}, 49);
    ParamTensor mb = make_param("mb", {2}, 50);
    Tensor xv({3, 4, 4, 1});
    fill_uniform(xv, 51);
    std::vector<ParamTensor*> ps{&k, &b, &mk, &mb};
    auto build = [&](Trace& t) {
      Var y = t.conv2d(t.input(xv), t.param(k), t.param(b), 1, 1);
      Var m = t.conv2d(t.stack_channels(y), t.param(mk), t.param(mb), 1, 0);
      return t.softmax_cross_entropy(t.global_avg_pool(m), 1);
    };
    CHECK(grad_check(build, ps) < tol);
  }

  SUBCASE("linear softmax cross entropy") {
    ParamTensor w = make_param("w", {6, 4}, 52);
    ParamTensor b = make_param("b", {4}, 53);
    Tensor xv({6});
    fill_uniform(xv, 54);
    std::vector<ParamTensor*> ps{&w, &b};
    auto build = [&](Trace& t) { return t.softmax_cross_entropy(t.linear(t.input(xv), t.param(w), t.param(b)), 2); };
    CHECK(grad_check(build, ps) < tol);
  }

  SUBCASE("concat add_n scale pick") {
    ParamTensor a = make_param("a", {3}, 55);
    ParamTensor c = make_param("c", {3}, 56);
    std::vector<ParamTensor*> ps{&a, &c};
    auto build = [&](Trace& t) {
      Var va = t.param(a), vc = t.param(c);
      Var cat = t.concat({va, vc, t.scale(va, -0.5)}, 0);
      Var s = t.add_n({t.pick(cat, 0), t.pick(cat, 4), t.pick(cat, 7)});
      return t.scale(s, 1.5);
    };
    CHECK(grad_check(build, ps) < tol);
  }

  SUBCASE("dense_block composite") {
    ParamTensor k1 = make_param("k1", {3, 3, 1, 2}, 57);
    ParamTensor b1 = make_param("b1", {2}, 58);
    ParamTensor k2 = make_param("k2", {3, 3, 3, 2}, 59);
    ParamTensor b2 = make_param("b2", {2}, 60);
    Tensor xv({4, 4, 1});
    fill_uniform(xv, 61);
    std::vector<ParamTensor*> ps{&k1, &b1, &k2, &b2};
    auto build = [&](Trace& t) {
      std::vector<ConvVars> layers{{t.param(k1), t.param(b1)}, {t.param(k2), t.param(b2)}};
      Var y = t.dense_block(t.input(xv), layers);
      return t.sigmoid_bce(t.global_avg_pool(y), t.input(Tensor({5}, {1, 0, 1, 0, 1})));
    };
    CHECK(grad_check(build, ps) < tol);
  }

  SUBCASE("global_avg_pool on batched maps") {
    ParamTensor k = make_param("k", {2, 2, 1, 2}, 62);
    ParamTensor b = make_param("b", {2}, 63);
    Tensor xv({2, 4, 4, 1});
    fill_uniform(xv, 64);
    std::vector<ParamTensor*> ps{&k, &b};
    auto build = [&](Trace& t) {
      Var y = t.global_avg_pool(t.conv2d(t.input(xv), t.param(k), t.param(b), 2, 0));
      return t.sigmoid_bce(t.flatten(y), t.input(Tensor::full({4}, 0.5)));
    };
    CHECK(grad_check(build, ps) < tol);
  }

  SUBCASE("shared parameter across two branches") {
    ParamTensor w = make_param("w", {4, 3}, 65);
    ParamTensor b = make_param("b", {3}, 66);
    Tensor x1({4}), x2({4});
    fill_uniform(x1, 67);
    fill_uniform(x2, 68);
    std::vector<ParamTensor*> ps{&w, &b};
    auto build = [&](Trace& t) {
      Var y1 = t.linear(t.input(x1), t.param(w), t.param(b));
      Var y2 = t.linear(t.input(x2), t.param(w), t.param(b));
      return t.add(t.softmax_cross_entropy(y1, 0), t.softmax_cross_entropy(y2, 2));
    };
    CHECK(grad_check(build, ps) < tol);
  }

  SUBCASE("sum of squares") {
    ParamTensor x = make_param("x", {6}, 69);
    std::vector<ParamTensor*> ps{&x};
    auto build = [&](Trace& t) {
      Var v = t.param(x);
      return t.reduce_sum(t.mul(v, v));
    };
    CHECK(grad_check(build, ps) < tol);
  }

  SUBCASE("mul of distinct operands") {
    ParamTensor a = make_param("a", {2, 3}, 70);
    ParamTensor b = make_param("b", {2, 3}, 71);
    std::vector<ParamTensor*> ps{&a, &b};
    auto build = [&](Trace& t) { return t.reduce_sum(t.mul(t.param(a), t.param(b))); };
    CHECK(grad_check(build, ps) < tol);
  }
}

TEST_CASE("mul and reduce_sum values and analytic gradients") {
  ParamTensor x("x", Tensor({4}, {1.0, -2.0, 3.0, 0.5}));
  Trace t;
  Var v = t.param(x);
  Var sq = t.mul(v, v);
  Var s = t.reduce_sum(sq);
  CHECK(s.value().item() == 1.0 + 4.0 + 9.0 + 0.25);
  t.backward(s);
  for (int i = 0; i < 4; ++i) CHECK(x.grad[i] == 2.0 * x.value[i]);  // d(sum x^2)/dx = 2x exactly

  Trace t2;
  CHECK_THROWS_AS(t2.mul(t2.input(Tensor({2})), t2.input(Tensor({3}))), std::runtime_error);
}

TEST_CASE("grad_check_stored flags a corrupted gradient entry") {
  ParamTensor w = make_param("w", {4, 3}, 71);
  ParamTensor b = make_param("b", {3}, 72);
  Tensor xv({4});
  fill_uniform(xv, 73);
  std::vector<ParamTensor*> ps{&w, &b};
  auto build = [&](Trace& t) { return t.softmax_cross_entropy(t.linear(t.input(xv), t.param(w), t.param(b)), 1); };

  CHECK(grad_check(build, ps) < 1e-6);

  // recompute clean gradients, then corrupt one entry by 10 percent
  for (ParamTensor* p : ps) p->zero_grad();
  {
    Trace t;
    Var l = build(t);
    t.backward(l);
  }
  w.grad[5] *= 1.1;
  CHECK(grad_check_stored(build, ps) >= 0.09);
}

TEST_CASE("input gradients are available for saliency") {
  ParamTensor k = make_param("k", {2, 2, 1, 1}, 81);
  ParamTensor b = make_param("b", {1}, 82);
  Tensor xv({4, 4, 1});
  fill_uniform(xv, 83);
  Trace t;
  Var x = t.input(xv);
  Var y = t.conv2d(x, t.param(k), t.param(b), 1, 0);
  Var l = t.pick(t.flatten(y), 0);
  t.backward(l);
  // output (0,0) touches inputs (0,0),(0,1),(1,0),(1,1) with kernel weights
  CHECK(x.grad().at({0, 0, 0}) == doctest::Approx(k.value[0]).epsilon(1e-14));
  CHECK(x.grad().at({0, 1, 0}) == doctest::Approx(k.value[1]).epsilon(1e-14));
  CHECK(x.grad().at({1, 0, 0}) == doctest::Approx(k.value[2]).epsilon(1e-14));
  CHECK(x.grad().at({1, 1, 0}) == doctest::Approx(k.value[3]).epsilon(1e-14));
  CHECK(x.grad().at({3, 3, 0}) == 0.0);
}

TEST_SUITE_END();
