#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ddsr/adam.hpp"
#include "ddsr/grad_check.hpp"
#include "ddsr/graph.hpp"
#include "ddsr/ops.hpp"
#include "ddsr/tensor.hpp"

#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace ddsr;

namespace {

template <typename S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  }
  return m;
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor<float> t(2, 3, 4, 5);
  CHECK_EQ(t.size(), 2 * 3 * 4 * 5);
  CHECK(t.all_finite());
  t(1, 2, 3, 4) = 7.0f;
  CHECK_EQ(t[t.size() - 1], 7.0f);
  CHECK_THROWS_AS(Tensor<float>(1, -1, 2, 2), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK_EQ(Tensor<float>::scalar(3.0f).item(), 3.0f);
}

TEST_CASE("conv2d identity kernel passes input through") {
  auto x = synth::random_tensor<float>(2, 1, 6, 7, 42);
  Tensor<float> w(1, 1, 3, 3);
  w(0, 0, 1, 1) = 1.0f;  // center tap
  Tensor<float> b(1, 1, 1, 1);
  auto y = conv2d(x, w, b);
  CHECK_EQ(max_abs_diff(x, y), 0.0);
}

TEST_CASE("conv2d all-ones window sums") {
  Tensor<float> x(1, 1, 3, 3, 1.0f);
  Tensor<float> w(1, 1, 3, 3, 1.0f);
  Tensor<float> b(1, 1, 1, 1);
  auto y = conv2d(x, w, b);
  CHECK_EQ(y(0, 0, 1, 1), doctest::Approx(9.0f));  // full window
  CHECK_EQ(y(0, 0, 0, 0), doctest::Approx(4.0f));  // zero-padded corner
  CHECK_EQ(y(0, 0, 0, 1), doctest::Approx(6.0f));  // edge
}

TEST_CASE("conv2d of zeros yields per-channel bias") {
  Tensor<float> x(2, 3, 4, 4);
  auto w = synth::random_tensor<float>(5, 3, 3, 3, 7);
  Tensor<float> b(1, 5, 1, 1);
  for (Index c = 0; c < 5; ++c) b[c] = 0.25f * float(c + 1);
  auto y = conv2d(x, w, b);
  for (Index c = 0; c < 5; ++c) {
    CHECK_EQ(y(1, c, 2, 3), 0.25f * float(c + 1));
  }
}

TEST_CASE("conv2d rejects channel mismatch") {
  Tensor<float> x(1, 3, 4, 4);
  Tensor<float> w(2, 4, 3, 3);
  Tensor<float> b(1, 2, 1, 1);
  CHECK_THROWS_AS(conv2d(x, w, b), ShapeError);
  Tensor<float> w5(2, 3, 5, 5);
  CHECK_THROWS_AS(conv2d(x, w5, b), ShapeError);
}

TEST_CASE("conv2d is linear when bias is zero") {
  auto x = synth::random_tensor<float>(1, 2, 8, 8, 1);
  auto y = synth::random_tensor<float>(1, 2, 8, 8, 2);
  auto w = synth::random_tensor<float>(3, 2, 3, 3, 3);
  Tensor<float> b(1, 3, 1, 1);
  const float alpha = 0.7f, beta = -1.3f;
  Tensor<float> mix(x.shape());
  mix.array() = alpha * x.array() + beta * y.array();
  auto lhs = conv2d(mix, w, b);
  Tensor<float> rhs(lhs.shape());
  rhs.array() = alpha * conv2d(x, w, b).array() + beta * conv2d(y, w, b).array();
  double scale = 0.0;
  for (Index i = 0; i < lhs.size(); ++i) scale = std::max(scale, std::abs(double(rhs[i])));
  CHECK_LT(max_abs_diff(lhs, rhs) / scale, 1e-5);
}

TEST_CASE("relu clamps negatives") {
  Tensor<float> x(1, 1, 1, 3);
  x[0] = -1.0f;
  x[1] = 0.0f;
  x[2] = 2.0f;
  auto y = relu(x);
  CHECK_EQ(y[0], 0.0f);
  CHECK_EQ(y[1], 0.0f);
  CHECK_EQ(y[2], 2.0f);

  auto neg = synth::random_tensor<float>(1, 2, 3, 3, 5, -2.0, -0.1);
  CHECK_EQ(relu(neg).array().abs().maxCoeff(), 0.0f);
  auto pos = synth::random_tensor<float>(1, 2, 3, 3, 6, 0.1, 2.0);
  CHECK_EQ(max_abs_diff(relu(pos), pos), 0.0);
}

TEST_CASE("bilinear upsample reproduces constants and identity") {
  Tensor<float> c(1, 2, 3, 3, 0.375f);
  for (Index s : {1, 2, 4}) {
    auto y = bilinear_upsample(c, s);
    CHECK_EQ(y.shape()[2], 3 * s);
    CHECK_EQ(y.array().minCoeff(), 0.375f);
    CHECK_EQ(y.array().maxCoeff(), 0.375f);
  }
  auto x = synth::random_tensor<float>(2, 3, 5, 4, 11);
  CHECK_EQ(max_abs_diff(bilinear_upsample(x, 1), x), 0.0);
  CHECK_THROWS_AS(bilinear_upsample(x, 0), ShapeError);
}

TEST_CASE("bilinear upsample matches the half-pixel formula on a 2x2 block") {
  Tensor<double> x(1, 1, 2, 2);
  x(0, 0, 0, 0) = 0.0;
  x(0, 0, 0, 1) = 1.0;
  x(0, 0, 1, 0) = 2.0;
  x(0, 0, 1, 1) = 3.0;
  auto y = bilinear_upsample(x, 2);
  // corners hit the source pixels exactly
  CHECK_EQ(y(0, 0, 0, 0), 0.0);
  CHECK_EQ(y(0, 0, 0, 3), 1.0);
  CHECK_EQ(y(0, 0, 3, 0), 2.0);
  CHECK_EQ(y(0, 0, 3, 3), 3.0);
  // hand-evaluated interior sample: rows blend 0.75/0.25, cols likewise
  CHECK_EQ(y(0, 0, 1, 1), doctest::Approx(0.75).epsilon(1e-12));
  auto ref = oracle::bilinear_reference(x, 2);
  CHECK_LT(max_abs_diff(y, ref), 1e-12);
}

TEST_CASE("bilinear upsample agrees with the reference on random input") {
  auto x = synth::random_tensor<double>(2, 2, 5, 7, 19);
  for (Index s : {2, 4}) {
    CHECK_LT(max_abs_diff(bilinear_upsample(x, s), oracle::bilinear_reference(x, s)), 1e-12);
  }
}

TEST_CASE("bilinear upsample preserves the value range") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto x = synth::random_tensor<float>(1, 3, 6, 5, seed);
    auto y = bilinear_upsample(x, 2);
    CHECK_GE(y.array().minCoeff(), x.array().minCoeff());
    CHECK_LE(y.array().maxCoeff(), x.array().maxCoeff());
  }
}

TEST_CASE("huber values") {
  Tensor<float> zero(1, 1, 1, 1);
  CHECK_EQ(huber(zero, zero, 1.0f), 0.0f);

  Tensor<float> p = Tensor<float>::scalar(0.5f);
  Tensor<float> t = Tensor<float>::scalar(0.0f);
  CHECK_EQ(huber(p, t, 1.0f), doctest::Approx(0.125f));  // quadratic zone

  p = Tensor<float>::scalar(2.0f);
  CHECK_EQ(huber(p, t, 1.0f), doctest::Approx(1.5f));  // linear zone

  Tensor<float> bad(1, 1, 2, 1);
  CHECK_THROWS_AS(huber(p, bad, 1.0f), ShapeError);
  CHECK_THROWS_AS(huber(p, t, 0.0f), ShapeError);
}

TEST_CASE("huber is non-negative, zero iff equal, sign-symmetric") {
  auto a = synth::random_tensor<float>(1, 2, 4, 4, 21);
  auto b = synth::random_tensor<float>(1, 2, 4, 4, 22);
  const float v = huber(a, b, 1.0f);
  CHECK_GT(v, 0.0f);
  CHECK_EQ(huber(a, a, 1.0f), 0.0f);
  // swapping pred/target flips e's sign, value unchanged
  CHECK_EQ(huber(b, a, 1.0f), v);
}

TEST_CASE("backward: huber of scaled input gives quadratic-zone derivative") {
  Parameter<float> w("w", Tensor<float>::scalar(0.3f));
  Graph<float> g;
  auto wv = g.use(w);
  auto x = g.constant(Tensor<float>::scalar(1.0f));
  auto loss = huber_term(mul(wv, x), Tensor<float>::scalar(0.0f), 1.0f);
  w.zero_grad();
  g.backward(loss);
  CHECK_EQ(w.grad[0], doctest::Approx(0.3f));
}

TEST_CASE("backward: unused parameter keeps zero grad") {
  Parameter<float> used("used", Tensor<float>::scalar(0.5f));
  Parameter<float> unused("unused", Tensor<float>::scalar(0.5f));
  Graph<float> g;
  auto loss = huber_term(g.use(used), Tensor<float>::scalar(0.0f), 1.0f);
  used.zero_grad();
  unused.zero_grad();
  g.backward(loss);
  CHECK_NE(used.grad[0], 0.0f);
  CHECK_EQ(unused.grad[0], 0.0f);
}

TEST_CASE("backward: shared parameter accumulates both path gradients") {
  Parameter<double> w("w", Tensor<double>::scalar(0.4));
  const Tensor<double> x = Tensor<double>::scalar(0.7);
  const Tensor<double> y = Tensor<double>::scalar(-0.2);
  auto eval = [&](bool with_grad) {
    Graph<double> g;
    auto wv = g.use(w);
    auto s = mul(wv, g.constant(x)) + mul(wv, g.constant(y));
    auto loss = huber_term(s, Tensor<double>::scalar(0.0), 1.0);
    if (with_grad) {
      w.zero_grad();
      g.backward(loss);
    }
    return g.value(loss).item();
  };
  eval(true);
  // two uses of w: grad = e*(x+y) with e = w(x+y)
  const double expected = 0.4 * 0.5 * 0.5;
  CHECK_EQ(w.grad[0], doctest::Approx(expected).epsilon(1e-12));
  auto res = grad_check({&w}, eval, 4, 99);
  CHECK_LT(res.max_rel_error, 1e-9);
}

TEST_CASE("backward rejects misuse") {
  Graph<float> g;
  CHECK_THROWS_AS(g.backward(Var<float>{&g, 0}), ShapeError);  // nothing recorded
  auto v = g.constant(synth::random_tensor<float>(1, 1, 2, 2, 1));
  CHECK_THROWS_AS(g.backward(v), ShapeError);  // non-scalar loss
  Graph<float> other;
  auto s = other.constant(Tensor<float>::scalar(1.0f));
  CHECK_THROWS_AS(g.backward(s), ShapeError);  // wrong graph
  other.backward(s);
  CHECK_THROWS_AS(other.backward(s), ShapeError);  // double backward
}

TEST_CASE("adam: zero grads leave values unchanged") {
  Parameter<float> p("p", synth::random_tensor<float>(1, 2, 3, 3, 31));
  const Tensor<float> before = p.value;
  std::vector<Parameter<float>*> params{&p};
  auto st = make_adam(params, 1e-2f);
  p.zero_grad();
  for (int i = 0; i < 5; ++i) adam_step(params, st);
  CHECK_EQ(max_abs_diff(before, p.value), 0.0);
  CHECK_EQ(st.t, 5);
}

TEST_CASE("adam: first step moves by ~lr under unit gradient") {
  Parameter<float> p("p", Tensor<float>::scalar(1.0f));
  std::vector<Parameter<float>*> params{&p};
  auto st = make_adam(params, 1e-3f);
  p.grad.fill(1.0f);
  adam_step(params, st);
  CHECK_EQ(1.0f - p.value[0], doctest::Approx(1e-3f).epsilon(1e-4));
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    Parameter<float> p("p", synth::random_tensor<float>(1, 1, 4, 4, 8));
    std::vector<Parameter<float>*> params{&p};
    auto st = make_adam(params, 1e-2f);
    for (int i = 0; i < 10; ++i) {
      p.grad = synth::random_tensor<float>(1, 1, 4, 4, 100 + std::uint64_t(i));
      adam_step(params, st);
    }
    return p.value;
  };
  CHECK_EQ(max_abs_diff(run(), run()), 0.0);
}

TEST_CASE("grad_check: linear model under quadratic loss is exact") {
  Parameter<double> w("w", synth::random_tensor<double>(1, 1, 2, 2, 61));
  const Tensor<double> x = synth::random_tensor<double>(1, 1, 2, 2, 62, 0.5, 1.5);
  auto eval = [&](bool with_grad) {
    Graph<double> g;
    auto prod = mul(g.use(w), g.constant(x));
    // |e| < delta everywhere: pure quadratic zone, central diffs are exact
    auto loss = huber_term(prod, Tensor<double>(1, 1, 2, 2, 0.0), 1e6);
    if (with_grad) {
      w.zero_grad();
      g.backward(loss);
    }
    return g.value(loss).item();
  };
  auto res = grad_check({&w}, eval, 8, 5);
  CHECK_LT(res.max_rel_error, 1e-9);
}

TEST_CASE("grad_check flags a corrupted gradient") {
  Parameter<double> w("w", Tensor<double>::scalar(0.8));
  auto eval = [&](bool with_grad) {
    Graph<double> g;
    auto loss = huber_term(g.use(w), Tensor<double>::scalar(0.0), 10.0);
    if (with_grad) {
      w.zero_grad();
      g.backward(loss);
      w.grad[0] *= 2.0;  // corrupt: analytic = 2g vs numeric g
    }
    return g.value(loss).item();
  };
  auto res = grad_check({&w}, eval, 2, 17);
  CHECK_EQ(res.max_rel_error, doctest::Approx(1.0 / 3.0).epsilon(1e-4));
  CHECK_GT(res.max_rel_error, 1e-4);  // flagged as failure at the usual tolerance
}

TEST_CASE("grad_check rejects non-finite losses") {
  Parameter<double> w("w", Tensor<double>::scalar(1.0));
  auto eval = [&](bool) { return std::numeric_limits<double>::quiet_NaN(); };
  CHECK_THROWS_AS(grad_check({&w}, eval, 1, 1), DivergenceError);
}

TEST_CASE("operators keep finite inputs finite") {
  auto x = synth::random_tensor<float>(2, 3, 8, 8, 77);
  auto w = synth::random_tensor<float>(4, 3, 3, 3, 78);
  Tensor<float> b(1, 4, 1, 1, 0.1f);
  CHECK(conv2d(x, w, b).all_finite());
  CHECK(relu(x).all_finite());
  CHECK(bilinear_upsample(x, 4).all_finite());
}
