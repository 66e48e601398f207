#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "ddsr/tensor.hpp"

namespace ddsr {

namespace detail {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Unrolls zero-padded 3x3 windows of one batch image into a (Cin*9, H*W)
// matrix so the convolution becomes a single GEMM.
template <typename Scalar>
void im2col_3x3(const Tensor<Scalar>& x, Index b, RowMat<Scalar>& col) {
  const Index C = x.channels(), H = x.height(), W = x.width();
  col.setZero();
  for (Index c = 0; c < C; ++c) {
    for (Index u = 0; u < 3; ++u) {
      for (Index v = 0; v < 3; ++v) {
        Scalar* row = col.data() + static_cast<std::size_t>((c * 3 + u) * 3 + v) * (H * W);
        const Index j0 = std::max<Index>(0, 1 - v);
        const Index j1 = std::min<Index>(W, W + 1 - v);
        if (j1 <= j0) continue;
        for (Index i = 0; i < H; ++i) {
          const Index si = i + u - 1;
          if (si < 0 || si >= H) continue;
          const Scalar* src = &x(b, c, si, j0 + v - 1);
          std::copy(src, src + (j1 - j0), row + i * W + j0);
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_3x3_add(const RowMat<Scalar>& col, Index b, Tensor<Scalar>& gx) {
  const Index C = gx.channels(), H = gx.height(), W = gx.width();
  for (Index c = 0; c < C; ++c) {
    for (Index u = 0; u < 3; ++u) {
      for (Index v = 0; v < 3; ++v) {
        const Scalar* row = col.data() + static_cast<std::size_t>((c * 3 + u) * 3 + v) * (H * W);
        const Index j0 = std::max<Index>(0, 1 - v);
        const Index j1 = std::min<Index>(W, W + 1 - v);
        if (j1 <= j0) continue;
        for (Index i = 0; i < H; ++i) {
          const Index si = i + u - 1;
          if (si < 0 || si >= H) continue;
          Scalar* dst = &gx(b, c, si, j0 + v - 1);
          const Scalar* src = row + i * W + j0;
          for (Index j = 0; j < j1 - j0; ++j) dst[j] += src[j];
        }
      }
    }
  }
}

template <typename Scalar>
void check_conv_args(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                     const Tensor<Scalar>& bias) {
  if (weight.height() != 3 || weight.width() != 3) {
    throw ShapeError("conv2d: kernel must be 3x3, got " + shape_str(weight.shape()));
  }
  if (weight.channels() != x.channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(x.channels()) +
                     " channels but weight expects " + std::to_string(weight.channels()));
  }
  if (bias.size() != weight.batch() || bias.channels() != weight.batch()) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match Cout=" +
                     std::to_string(weight.batch()));
  }
}

}  // namespace detail

// 3x3 convolution, stride 1, zero padding 1 (spatial size preserved).
// weight: (Cout, Cin, 3, 3); bias: (1, Cout, 1, 1).
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias) {
  detail::check_conv_args(x, weight, bias);
  const Index B = x.batch(), H = x.height(), W = x.width();
  const Index Cout = weight.batch(), K = weight.channels() * 9, N = H * W;

  Tensor<Scalar> out(B, Cout, H, W);
  detail::RowMat<Scalar> col(K, N);
  Eigen::Map<const detail::RowMat<Scalar>> wm(weight.data(), Cout, K);
  Eigen::Map<const detail::VecX<Scalar>> bv(bias.data(), Cout);
  for (Index b = 0; b < B; ++b) {
    detail::im2col_3x3(x, b, col);
    Eigen::Map<detail::RowMat<Scalar>> om(&out(b, 0, 0, 0), Cout, N);
    om.noalias() = wm * col;
    om.colwise() += bv;
  }
  return out;
}

// Accumulates gradients w.r.t. any of x / weight / bias (skipped when null).
template <typename Scalar>
void conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                     const Tensor<Scalar>& gout, Tensor<Scalar>* gx, Tensor<Scalar>* gweight,
                     Tensor<Scalar>* gbias) {
  const Index B = x.batch(), H = x.height(), W = x.width();
  const Index Cout = weight.batch(), K = weight.channels() * 9, N = H * W;

  detail::RowMat<Scalar> col(K, N);
  detail::RowMat<Scalar> colg;
  Eigen::Map<const detail::RowMat<Scalar>> wm(weight.data(), Cout, K);
  for (Index b = 0; b < B; ++b) {
    Eigen::Map<const detail::RowMat<Scalar>> gm(&gout(b, 0, 0, 0), Cout, N);
    if (gweight != nullptr) {
      detail::im2col_3x3(x, b, col);
      Eigen::Map<detail::RowMat<Scalar>> gw(gweight->data(), Cout, K);
      gw.noalias() += gm * col.transpose();
    }
    if (gbias != nullptr) {
      Eigen::Map<detail::VecX<Scalar>> gb(gbias->data(), Cout);
      gb.noalias() += gm.rowwise().sum();
    }
    if (gx != nullptr) {
      colg.resize(K, N);
      colg.noalias() = wm.transpose() * gm;
      detail::col2im_3x3_add(colg, b, *gx);
    }
  }
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.shape());
  out.array() = x.array().max(Scalar(0));
  return out;
}

// Subgradient at 0 is 0.
template <typename Scalar>
void relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& gout, Tensor<Scalar>& gx) {
  gx.array() += (x.array() > Scalar(0)).template cast<Scalar>() * gout.array();
}

namespace detail {

struct LinearTap {
  Index a, b;
  double wa, wb;
};

// Half-pixel-center sampling: src = (dst + 0.5)/s - 0.5, edge-clamped.
inline std::vector<LinearTap> bilinear_taps(Index in_dim, Index s) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(in_dim * s));
  for (Index d = 0; d < in_dim * s; ++d) {
    const double src = (static_cast<double>(d) + 0.5) / static_cast<double>(s) - 0.5;
    const double f = std::floor(src);
    const double t = src - f;
    const Index i0 = static_cast<Index>(f);
    taps[static_cast<std::size_t>(d)] = {
        std::clamp<Index>(i0, 0, in_dim - 1),
        std::clamp<Index>(i0 + 1, 0, in_dim - 1),
        1.0 - t,
        t,
    };
  }
  return taps;
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> bilinear_upsample(const Tensor<Scalar>& x, Index s) {
  if (s < 1) throw ShapeError("bilinear_upsample: scale factor must be >= 1");
  const Index B = x.batch(), C = x.channels(), H = x.height(), W = x.width();
  Tensor<Scalar> out(B, C, H * s, W * s);
  const auto rows = detail::bilinear_taps(H, s);
  const auto cols = detail::bilinear_taps(W, s);
  for (Index b = 0; b < B; ++b) {
    for (Index c = 0; c < C; ++c) {
      for (Index i = 0; i < H * s; ++i) {
        const auto& ri = rows[static_cast<std::size_t>(i)];
        for (Index j = 0; j < W * s; ++j) {
          const auto& cj = cols[static_cast<std::size_t>(j)];
          const double top = ri.wa * (cj.wa * x(b, c, ri.a, cj.a) + cj.wb * x(b, c, ri.a, cj.b));
          const double bot = ri.wb * (cj.wa * x(b, c, ri.b, cj.a) + cj.wb * x(b, c, ri.b, cj.b));
          out(b, c, i, j) = static_cast<Scalar>(top + bot);
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
void bilinear_upsample_backward(const Tensor<Scalar>& gout, Index s, Tensor<Scalar>& gx) {
  const Index B = gx.batch(), C = gx.channels(), H = gx.height(), W = gx.width();
  const auto rows = detail::bilinear_taps(H, s);
  const auto cols = detail::bilinear_taps(W, s);
  for (Index b = 0; b < B; ++b) {
    for (Index c = 0; c < C; ++c) {
      for (Index i = 0; i < H * s; ++i) {
        const auto& ri = rows[static_cast<std::size_t>(i)];
        for (Index j = 0; j < W * s; ++j) {
          const auto& cj = cols[static_cast<std::size_t>(j)];
          const double g = gout(b, c, i, j);
          gx(b, c, ri.a, cj.a) += static_cast<Scalar>(ri.wa * cj.wa * g);
          gx(b, c, ri.a, cj.b) += static_cast<Scalar>(ri.wa * cj.wb * g);
          gx(b, c, ri.b, cj.a) += static_cast<Scalar>(ri.wb * cj.wa * g);
          gx(b, c, ri.b, cj.b) += static_cast<Scalar>(ri.wb * cj.wb * g);
        }
      }
    }
  }
}

// Mean Huber loss: 0.5 e^2 for |e| <= delta, else delta(|e| - 0.5 delta).
template <typename Scalar>
Scalar huber(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Scalar delta) {
  check_same_shape(pred, target, "huber");
  if (!(delta > Scalar(0))) throw ShapeError("huber: delta must be positive");
  if (pred.size() == 0) throw ShapeError("huber: empty tensors");
  const double d = static_cast<double>(delta);
  double sum = 0.0;
  for (Index i = 0; i < pred.size(); ++i) {
    const double e = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    const double a = std::abs(e);
    sum += (a <= d) ? 0.5 * e * e : d * (a - 0.5 * d);
  }
  return static_cast<Scalar>(sum / static_cast<double>(pred.size()));
}

// d(mean huber)/d(pred) scaled by `upstream`, accumulated into gpred.
template <typename Scalar>
void huber_backward(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Scalar delta,
                    Scalar upstream, Tensor<Scalar>& gpred) {
  const Scalar inv_n = upstream / static_cast<Scalar>(pred.size());
  for (Index i = 0; i < pred.size(); ++i) {
    const Scalar e = pred[i] - target[i];
    gpred[i] += inv_n * std::clamp(e, -delta, delta);
  }
}

}  // namespace ddsr
