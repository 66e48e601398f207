#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ddsr/graph.hpp"
#include "ddsr/rng.hpp"
#include "ddsr/tensor.hpp"

namespace ddsr {

// One 35-channel band group is the native input unit; `channels` shrinks or
// grows for ablations and toy configs. scale 1 is an identity pass-through
// used by pipeline sanity checks.
struct ModelConfig {
  Index channels = 35;  // C, bands per group
  Index hidden = 32;    // C_h
  Index scale = 4;      // s
  bool use_spatial_net = true;
  bool use_wavelet_net = true;
  bool share_high_branch = true;

  void validate() const {
    if (channels < 1) throw ShapeError("ModelConfig: channels must be >= 1");
    if (hidden < 1) throw ShapeError("ModelConfig: hidden width must be >= 1");
    if (scale != 1 && scale != 2 && scale != 4 && scale != 8) {
      throw ShapeError("ModelConfig: scale must be one of {1,2,4,8}, got " +
                       std::to_string(scale));
    }
  }
};

template <typename Scalar>
struct ConvParams {
  Parameter<Scalar> weight;  // (Cout, Cin, 3, 3)
  Parameter<Scalar> bias;    // (1, Cout, 1, 1)
};

// Conv(C -> C_h) - ReLU - Conv(C_h -> C), added back onto the input.
template <typename Scalar>
struct BranchParams {
  ConvParams<Scalar> conv_a;
  ConvParams<Scalar> conv_b;
};

template <typename Scalar>
struct DDSRNetParams {
  ModelConfig config;
  // Spatial-Net (present iff use_spatial_net)
  ConvParams<Scalar> conv1, conv2, conv3;
  // Wavelet branches (present iff use_wavelet_net); high has one entry when
  // the branch is shared, else three in subband order LH, HL, HH.
  BranchParams<Scalar> low;
  std::vector<BranchParams<Scalar>> high;

  std::vector<Parameter<Scalar>*> all() {
    std::vector<Parameter<Scalar>*> out;
    auto push_conv = [&out](ConvParams<Scalar>& c) {
      out.push_back(&c.weight);
      out.push_back(&c.bias);
    };
    if (config.use_spatial_net) {
      push_conv(conv1);
      push_conv(conv2);
      push_conv(conv3);
    }
    if (config.use_wavelet_net) {
      push_conv(low.conv_a);
      push_conv(low.conv_b);
      for (auto& br : high) {
        push_conv(br.conv_a);
        push_conv(br.conv_b);
      }
    }
    return out;
  }

  void zero_grad() {
    for (Parameter<Scalar>* p : all()) p->zero_grad();
  }
};

namespace detail {

template <typename Scalar>
ConvParams<Scalar> init_conv(const std::string& name, Index cout, Index cin, Rng& rng) {
  Tensor<Scalar> w(cout, cin, 3, 3);
  const double bound = std::sqrt(1.0 / static_cast<double>(cin * 9));
  for (Index i = 0; i < w.size(); ++i) w[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
  Tensor<Scalar> b(1, cout, 1, 1);
  return {Parameter<Scalar>(name + ".weight", std::move(w)),
          Parameter<Scalar>(name + ".bias", std::move(b))};
}

}  // namespace detail

// Weights uniform in +-sqrt(1/fan_in) with fan_in = Cin*9; biases zero.
template <typename Scalar>
DDSRNetParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  DDSRNetParams<Scalar> p;
  p.config = cfg;
  const Index c = cfg.channels, ch = cfg.hidden;
  if (cfg.use_spatial_net) {
    p.conv1 = detail::init_conv<Scalar>("spatial.conv1", ch, c, rng);
    p.conv2 = detail::init_conv<Scalar>("spatial.conv2", ch, ch, rng);
    p.conv3 = detail::init_conv<Scalar>("spatial.conv3", c, ch, rng);
  }
  if (cfg.use_wavelet_net) {
    p.low.conv_a = detail::init_conv<Scalar>("low.conv_a", ch, c, rng);
    p.low.conv_b = detail::init_conv<Scalar>("low.conv_b", c, ch, rng);
    if (cfg.share_high_branch) {
      p.high.resize(1);
      p.high[0].conv_a = detail::init_conv<Scalar>("high.conv_a", ch, c, rng);
      p.high[0].conv_b = detail::init_conv<Scalar>("high.conv_b", c, ch, rng);
    } else {
      p.high.resize(3);
      const char* tags[3] = {"high_lh", "high_hl", "high_hh"};
      for (int k = 0; k < 3; ++k) {
        p.high[k].conv_a = detail::init_conv<Scalar>(std::string(tags[k]) + ".conv_a", ch, c, rng);
        p.high[k].conv_b = detail::init_conv<Scalar>(std::string(tags[k]) + ".conv_b", c, ch, rng);
      }
    }
  }
  return p;
}

template <typename Scalar>
Index param_count(DDSRNetParams<Scalar>& params) {
  Index n = 0;
  for (const Parameter<Scalar>* p : params.all()) n += p->value.size();
  return n;
}

template <typename Scalar>
struct ForwardVars {
  Var<Scalar> sr;            // X_SR
  Var<Scalar> spatial;       // Spatial-Net output
  Var<Scalar> ll_refined;    // refined LL subband
  Var<Scalar> high_refined;  // refined details, (3B, C, h, w)
};

template <typename Scalar>
struct ForwardOutputs {
  Tensor<Scalar> sr;
  Tensor<Scalar> spatial;
  Tensor<Scalar> ll_refined;
  Tensor<Scalar> high_refined;
};

// Conv3(U(Conv2(relu(Conv1(x))))) + U(x)
template <typename Scalar>
Var<Scalar> spatial_net_forward(Graph<Scalar>& g, Var<Scalar> x, DDSRNetParams<Scalar>& p,
                                Index s) {
  auto f = conv2d(relu(conv2d(x, g.use(p.conv1.weight), g.use(p.conv1.bias))),
                  g.use(p.conv2.weight), g.use(p.conv2.bias));
  auto main = conv2d(bilinear_upsample(f, s), g.use(p.conv3.weight), g.use(p.conv3.bias));
  return main + bilinear_upsample(x, s);
}

namespace detail {

template <typename Scalar>
Var<Scalar> branch_forward(Graph<Scalar>& g, Var<Scalar> v, BranchParams<Scalar>& br) {
  auto r = conv2d(relu(conv2d(v, g.use(br.conv_a.weight), g.use(br.conv_a.bias))),
                  g.use(br.conv_b.weight), g.use(br.conv_b.bias));
  return v + r;
}

}  // namespace detail

template <typename Scalar>
ForwardVars<Scalar> ddsrnet_forward(Graph<Scalar>& g, Var<Scalar> x, DDSRNetParams<Scalar>& p) {
  const ModelConfig& cfg = p.config;
  cfg.validate();
  if (g.value(x).channels() != cfg.channels) {
    throw ShapeError("ddsrnet_forward: input has " + std::to_string(g.value(x).channels()) +
                     " channels, config expects " + std::to_string(cfg.channels));
  }

  Var<Scalar> spatial = cfg.use_spatial_net ? spatial_net_forward(g, x, p, cfg.scale)
                                            : bilinear_upsample(x, cfg.scale);

  if (!cfg.use_wavelet_net) {
    // Ablation contract: sr is the spatial output itself, subbands unrefined.
    return {spatial, spatial, dwt_ll(spatial), dwt_high(spatial)};
  }

  Var<Scalar> ll = dwt_ll(spatial);
  Var<Scalar> high = dwt_high(spatial);
  Var<Scalar> ll_ref = detail::branch_forward(g, ll, p.low);
  Var<Scalar> high_ref;
  if (cfg.share_high_branch) {
    high_ref = detail::branch_forward(g, high, p.high[0]);
  } else {
    const Index b = g.value(high).batch() / 3;
    high_ref = concat_batch(detail::branch_forward(g, slice_batch(high, 0, b), p.high[0]),
                            detail::branch_forward(g, slice_batch(high, b, b), p.high[1]),
                            detail::branch_forward(g, slice_batch(high, 2 * b, b), p.high[2]));
  }
  return {idwt(ll_ref, high_ref), spatial, ll_ref, high_ref};
}

// Inference without retaining a caller-visible graph.
template <typename Scalar>
ForwardOutputs<Scalar> ddsrnet_infer(const Tensor<Scalar>& x, DDSRNetParams<Scalar>& p) {
  Graph<Scalar> g;
  auto f = ddsrnet_forward(g, g.input(x), p);
  return {g.value(f.sr), g.value(f.spatial), g.value(f.ll_refined), g.value(f.high_refined)};
}

}  // namespace ddsr
