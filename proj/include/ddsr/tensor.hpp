#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ddsr/error.hpp"

namespace ddsr {

using Index = std::int64_t;
using Shape4 = std::array<Index, 4>;

inline std::string shape_str(const Shape4& s) {
  return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) +
         "," + std::to_string(s[3]) + ")";
}

namespace detail {

// Fixed 64-byte alignment keeps Eigen's vectorized kernels on identical
// code paths across allocations, which makes seeded runs bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(kAlign)); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

}  // namespace detail

// Dense rank-4 array (batch, channel, height, width), contiguous row-major.
// Scalar is float for training and double for gradient checking.
template <typename Scalar>
class Tensor {
 public:
  using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Map = Eigen::Map<ArrayX>;
  using ConstMap = Eigen::Map<const ArrayX>;

  Tensor() = default;

  Tensor(Index b, Index c, Index h, Index w, Scalar fill = Scalar(0)) : shape_{b, c, h, w} {
    if (b < 0 || c < 0 || h < 0 || w < 0) {
      throw ShapeError("Tensor: negative extent " + shape_str(shape_));
    }
    data_.assign(static_cast<std::size_t>(b * c * h * w), fill);
  }

  explicit Tensor(const Shape4& s, Scalar fill = Scalar(0)) : Tensor(s[0], s[1], s[2], s[3], fill) {}

  static Tensor scalar(Scalar v) {
    Tensor t(1, 1, 1, 1);
    t.data_[0] = v;
    return t;
  }

  const Shape4& shape() const { return shape_; }
  Index batch() const { return shape_[0]; }
  Index channels() const { return shape_[1]; }
  Index height() const { return shape_[2]; }
  Index width() const { return shape_[3]; }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator()(Index b, Index c, Index i, Index j) {
    return data_[flat(b, c, i, j)];
  }
  const Scalar& operator()(Index b, Index c, Index i, Index j) const {
    return data_[flat(b, c, i, j)];
  }

  Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  const Scalar& operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  Map array() { return Map(data_.data(), size()); }
  ConstMap array() const { return ConstMap(data_.data(), size()); }

  void fill(Scalar v) { array().setConstant(v); }
  void set_zero() { array().setZero(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const { return data_.empty() || array().isFinite().all(); }

  // scalar tensors (1,1,1,1) carry loss values
  Scalar item() const {
    if (size() != 1) throw ShapeError("Tensor::item: tensor is not scalar " + shape_str(shape_));
    return data_[0];
  }

 private:
  std::size_t flat(Index b, Index c, Index i, Index j) const {
    return static_cast<std::size_t>(((b * shape_[1] + c) * shape_[2] + i) * shape_[3] + j);
  }

  Shape4 shape_{0, 0, 0, 0};
  std::vector<Scalar, detail::AlignedAllocator<Scalar>> data_;
};

template <typename Scalar>
void check_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* where) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(where) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  Tensor<To> out(x.shape());
  for (Index i = 0; i < x.size(); ++i) out[i] = static_cast<To>(x[i]);
  return out;
}

// Trainable value with an accumulating gradient of the same shape.
template <typename Scalar>
struct Parameter {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  std::string name;

  Parameter() = default;
  Parameter(std::string n, Tensor<Scalar> v)
      : value(std::move(v)), grad(value.shape()), name(std::move(n)) {}

  void zero_grad() { grad.set_zero(); }
};

}  // namespace ddsr
