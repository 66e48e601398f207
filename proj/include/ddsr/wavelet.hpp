#pragma once

#include <string>

#include "ddsr/tensor.hpp"

namespace ddsr {

// Single-level orthonormal 2-D Haar decomposition. The three detail
// subbands are stacked along the batch axis in fixed order, so `high` of a
// (B,C,H,W) input has shape (3B, C, H/2, W/2) with batch blocks
// [LH | HL | HH]. Per non-overlapping 2x2 block [[a,b],[c,d]]:
//   LL = (a+b+c+d)/2   LH = (a+b-c-d)/2
//   HL = (a-b+c-d)/2   HH = (a-b-c+d)/2
template <typename Scalar>
struct WaveletPyramid {
  Tensor<Scalar> ll;    // (B, C, H/2, W/2)
  Tensor<Scalar> high;  // (3B, C, H/2, W/2)
};

namespace detail {

template <typename Scalar>
void check_even_dims(const Tensor<Scalar>& x, const char* where) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw ShapeError(std::string(where) + ": spatial dims must be even, got " +
                     shape_str(x.shape()));
  }
  if (x.height() == 0 || x.width() == 0) {
    throw ShapeError(std::string(where) + ": empty spatial dims " + shape_str(x.shape()));
  }
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> dwt2_ll(const Tensor<Scalar>& x) {
  detail::check_even_dims(x, "dwt2_haar");
  const Index B = x.batch(), C = x.channels(), h = x.height() / 2, w = x.width() / 2;
  Tensor<Scalar> ll(B, C, h, w);
  for (Index b = 0; b < B; ++b)
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < h; ++i)
        for (Index j = 0; j < w; ++j) {
          const Scalar a = x(b, c, 2 * i, 2 * j), bb = x(b, c, 2 * i, 2 * j + 1);
          const Scalar cc = x(b, c, 2 * i + 1, 2 * j), d = x(b, c, 2 * i + 1, 2 * j + 1);
          ll(b, c, i, j) = (a + bb + cc + d) / Scalar(2);
        }
  return ll;
}

template <typename Scalar>
Tensor<Scalar> dwt2_high(const Tensor<Scalar>& x) {
  detail::check_even_dims(x, "dwt2_haar");
  const Index B = x.batch(), C = x.channels(), h = x.height() / 2, w = x.width() / 2;
  Tensor<Scalar> high(3 * B, C, h, w);
  for (Index b = 0; b < B; ++b)
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < h; ++i)
        for (Index j = 0; j < w; ++j) {
          const Scalar a = x(b, c, 2 * i, 2 * j), bb = x(b, c, 2 * i, 2 * j + 1);
          const Scalar cc = x(b, c, 2 * i + 1, 2 * j), d = x(b, c, 2 * i + 1, 2 * j + 1);
          high(b, c, i, j) = (a + bb - cc - d) / Scalar(2);
          high(B + b, c, i, j) = (a - bb + cc - d) / Scalar(2);
          high(2 * B + b, c, i, j) = (a - bb - cc + d) / Scalar(2);
        }
  return high;
}

template <typename Scalar>
WaveletPyramid<Scalar> dwt2_haar(const Tensor<Scalar>& x) {
  return {dwt2_ll(x), dwt2_high(x)};
}

namespace detail {

template <typename Scalar>
Index check_pyramid(const Tensor<Scalar>& ll, const Tensor<Scalar>& high) {
  const Index B = ll.batch();
  if (high.batch() != 3 * B || high.channels() != ll.channels() ||
      high.height() != ll.height() || high.width() != ll.width()) {
    throw ShapeError("idwt2_haar: inconsistent subband shapes " + shape_str(ll.shape()) +
                     " vs " + shape_str(high.shape()));
  }
  if (ll.size() == 0) throw ShapeError("idwt2_haar: empty subbands");
  return B;
}

}  // namespace detail

// Exact inverse of dwt2_haar.
template <typename Scalar>
Tensor<Scalar> idwt2_from(const Tensor<Scalar>& ll, const Tensor<Scalar>& high) {
  const Index B = detail::check_pyramid(ll, high);
  const Index C = ll.channels(), h = ll.height(), w = ll.width();
  Tensor<Scalar> x(B, C, 2 * h, 2 * w);
  for (Index b = 0; b < B; ++b)
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < h; ++i)
        for (Index j = 0; j < w; ++j) {
          const Scalar l = ll(b, c, i, j);
          const Scalar lh = high(b, c, i, j);
          const Scalar hl = high(B + b, c, i, j);
          const Scalar hh = high(2 * B + b, c, i, j);
          x(b, c, 2 * i, 2 * j) = (l + lh + hl + hh) / Scalar(2);
          x(b, c, 2 * i, 2 * j + 1) = (l + lh - hl - hh) / Scalar(2);
          x(b, c, 2 * i + 1, 2 * j) = (l - lh + hl - hh) / Scalar(2);
          x(b, c, 2 * i + 1, 2 * j + 1) = (l - lh - hl + hh) / Scalar(2);
        }
  return x;
}

template <typename Scalar>
Tensor<Scalar> idwt2_haar(const WaveletPyramid<Scalar>& p) {
  return idwt2_from(p.ll, p.high);
}

// Adjoints. The transform is orthonormal, so the adjoint of each analysis
// map is the matching piece of the synthesis map (and vice versa).
template <typename Scalar>
void dwt2_ll_adjoint(const Tensor<Scalar>& gll, Tensor<Scalar>& gx) {
  const Index B = gll.batch(), C = gll.channels(), h = gll.height(), w = gll.width();
  for (Index b = 0; b < B; ++b)
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < h; ++i)
        for (Index j = 0; j < w; ++j) {
          const Scalar g = gll(b, c, i, j) / Scalar(2);
          gx(b, c, 2 * i, 2 * j) += g;
          gx(b, c, 2 * i, 2 * j + 1) += g;
          gx(b, c, 2 * i + 1, 2 * j) += g;
          gx(b, c, 2 * i + 1, 2 * j + 1) += g;
        }
}

template <typename Scalar>
void dwt2_high_adjoint(const Tensor<Scalar>& ghigh, Tensor<Scalar>& gx) {
  const Index B = gx.batch(), C = gx.channels(), h = ghigh.height(), w = ghigh.width();
  for (Index b = 0; b < B; ++b)
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < h; ++i)
        for (Index j = 0; j < w; ++j) {
          const Scalar lh = ghigh(b, c, i, j);
          const Scalar hl = ghigh(B + b, c, i, j);
          const Scalar hh = ghigh(2 * B + b, c, i, j);
          gx(b, c, 2 * i, 2 * j) += (lh + hl + hh) / Scalar(2);
          gx(b, c, 2 * i, 2 * j + 1) += (lh - hl - hh) / Scalar(2);
          gx(b, c, 2 * i + 1, 2 * j) += (-lh + hl - hh) / Scalar(2);
          gx(b, c, 2 * i + 1, 2 * j + 1) += (-lh - hl + hh) / Scalar(2);
        }
}

}  // namespace ddsr
