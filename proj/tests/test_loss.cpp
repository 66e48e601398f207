#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ddsr/grad_check.hpp"
#include "ddsr/loss.hpp"
#include "ddsr/model.hpp"
#include "ddsr/ops.hpp"

#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace ddsr;

namespace {

// assembles ForwardVars directly from tensors, bypassing the model
template <typename S>
ForwardVars<S> fake_outputs(Graph<S>& g, const Tensor<S>& sr, const Tensor<S>& spatial,
                            const Tensor<S>& ll, const Tensor<S>& high) {
  return {g.input(sr, true), g.input(spatial, true), g.input(ll, true), g.input(high, true)};
}

}  // namespace

TEST_CASE("perfect prediction has zero loss in every component") {
  const Tensor<float> hr = synth::patch_tensor<float>(3, 8, 8, 1);
  Graph<float> g;
  auto f = fake_outputs(g, hr, hr, dwt2_ll(hr), dwt2_high(hr));
  auto loss = hybrid_loss(g, f, hr, LossWeights{}, 1.0f);
  CHECK_EQ(loss.parts.rec, 0.0f);
  CHECK_EQ(loss.parts.spatial, 0.0f);
  CHECK_EQ(loss.parts.low, 0.0f);
  CHECK_EQ(loss.parts.high, 0.0f);
  CHECK_EQ(loss.parts.total, 0.0f);
}

TEST_CASE("doubling every weight doubles the total, components unchanged") {
  const Tensor<float> hr = synth::patch_tensor<float>(2, 8, 8, 2);
  const Tensor<float> sr = synth::patch_tensor<float>(2, 8, 8, 3);
  const Tensor<float> spatial = synth::patch_tensor<float>(2, 8, 8, 4);
  auto run = [&](const LossWeights& w) {
    Graph<float> g;
    auto f = fake_outputs(g, sr, spatial, dwt2_ll(spatial), dwt2_high(spatial));
    return hybrid_loss(g, f, hr, w, 1.0f).parts;
  };
  auto base = run(LossWeights{0.35, 0.35, 0.35, 0.35});
  auto twice = run(LossWeights{0.7, 0.7, 0.7, 0.7});
  CHECK_EQ(twice.rec, base.rec);
  CHECK_EQ(twice.spatial, base.spatial);
  CHECK_EQ(twice.low, base.low);
  CHECK_EQ(twice.high, base.high);
  CHECK_EQ(twice.total, doctest::Approx(2.0f * base.total).epsilon(1e-6));
}

TEST_CASE("single-term weights match an independent Huber oracle") {
  const Tensor<double> hr = synth::patch_tensor<double>(2, 8, 8, 5);
  const Tensor<double> sr = synth::patch_tensor<double>(2, 8, 8, 6);
  const Tensor<double> spatial = synth::patch_tensor<double>(2, 8, 8, 7);
  Graph<double> g;
  auto f = fake_outputs(g, sr, spatial, dwt2_ll(spatial), dwt2_high(spatial));
  auto loss = hybrid_loss(g, f, hr, LossWeights{0.35, 0.0, 0.0, 0.0}, 1.0);

  std::vector<double> p(sr.data(), sr.data() + sr.size());
  std::vector<double> t(hr.data(), hr.data() + hr.size());
  const double want = oracle::huber_reference(p, t, 1.0);
  CHECK_EQ(loss.parts.rec, doctest::Approx(want).epsilon(1e-12));
  CHECK_EQ(loss.parts.total, doctest::Approx(0.35 * want).epsilon(1e-12));
}

TEST_CASE("total composes from the components exactly") {
  const Tensor<float> hr = synth::patch_tensor<float>(3, 8, 8, 8);
  const Tensor<float> sr = synth::patch_tensor<float>(3, 8, 8, 9);
  const Tensor<float> spatial = synth::patch_tensor<float>(3, 8, 8, 10);
  const LossWeights w{0.35, 0.5, 0.1, 0.9};
  Graph<float> g;
  auto f = fake_outputs(g, sr, spatial, dwt2_ll(sr), dwt2_high(spatial));
  auto loss = hybrid_loss(g, f, hr, w, 1.0f);
  // same association order as the implementation: ((rec + spatial) + low) + high
  const float recomposed = ((float(w.rec) * loss.parts.rec + float(w.spatial) * loss.parts.spatial) +
                            float(w.low) * loss.parts.low) +
                           float(w.high) * loss.parts.high;
  CHECK_EQ(loss.parts.total, recomposed);
  CHECK_GE(loss.parts.rec, 0.0f);
  CHECK_GE(loss.parts.spatial, 0.0f);
  CHECK_GE(loss.parts.low, 0.0f);
  CHECK_GE(loss.parts.high, 0.0f);
}

TEST_CASE("lambda_rec=1 with zero others reproduces plain Huber bit for bit") {
  ModelConfig cfg;
  cfg.channels = 3;
  cfg.hidden = 4;
  cfg.scale = 2;
  auto params = init_params<float>(cfg, 77);
  const Tensor<float> x = synth::patch_tensor<float>(3, 8, 8, 11);
  const Tensor<float> hr = synth::patch_tensor<float>(3, 16, 16, 12);

  Graph<float> g;
  auto fwd = ddsrnet_forward(g, g.input(x), params);
  auto loss = hybrid_loss(g, fwd, hr, LossWeights{1.0, 0.0, 0.0, 0.0}, 1.0f);
  const float plain = huber(g.value(fwd.sr), hr, 1.0f);
  CHECK_EQ(loss.parts.total, plain);

  // gradients also match a plain-Huber-only backward pass
  params.zero_grad();
  g.backward(loss.total);
  Tensor<float> got = params.conv1.weight.grad;

  Graph<float> g2;
  auto fwd2 = ddsrnet_forward(g2, g2.input(x), params);
  auto plain_loss = huber_term(fwd2.sr, hr, 1.0f);
  params.zero_grad();
  g2.backward(plain_loss);
  for (Index i = 0; i < got.size(); ++i) CHECK_EQ(got[i], params.conv1.weight.grad[i]);
}

TEST_CASE("shape mismatch and odd target dims are rejected") {
  const Tensor<float> hr = synth::patch_tensor<float>(2, 8, 8, 13);
  const Tensor<float> sr = synth::patch_tensor<float>(2, 6, 6, 14);
  Graph<float> g;
  auto f = fake_outputs(g, sr, sr, dwt2_ll(sr), dwt2_high(sr));
  CHECK_THROWS_AS(hybrid_loss(g, f, hr, LossWeights{}, 1.0f), ShapeError);

  LossWeights negative;
  negative.rec = -1.0;
  Graph<float> g3;
  auto f3 = fake_outputs(g3, hr, hr, dwt2_ll(hr), dwt2_high(hr));
  CHECK_THROWS_AS(hybrid_loss(g3, f3, hr, negative, 1.0f), ShapeError);
}

TEST_CASE("hybrid loss gradient passes grad_check on a toy model") {
  ModelConfig cfg;
  cfg.channels = 2;
  cfg.hidden = 3;
  cfg.scale = 2;
  cfg.share_high_branch = false;  // exercise the per-subband path too
  auto params = init_params<double>(cfg, 99);
  const Tensor<double> x = synth::patch_tensor<double>(2, 6, 6, 15);
  const Tensor<double> hr = synth::patch_tensor<double>(2, 12, 12, 16);
  auto ptrs = params.all();
  auto eval = [&](bool with_grad) {
    Graph<double> g;
    auto fwd = ddsrnet_forward(g, g.input(x), params);
    auto loss = hybrid_loss(g, fwd, hr, LossWeights{0.35, 0.35, 0.35, 0.35}, 1.0);
    if (with_grad) {
      params.zero_grad();
      g.backward(loss.total);
    }
    return double(g.value(loss.total).item());
  };
  auto res = grad_check(ptrs, eval, 100, 4242);
  CAPTURE(res.worst_param);
  CHECK_LT(res.max_rel_error, 1e-4);
}
