#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ddsr/tensor.hpp"

namespace ddsr {

// Bias-corrected Adam. Moments are kept per parameter, aligned by index
// with the parameter list passed to adam_step.
template <typename Scalar>
struct AdamState {
  Scalar lr = Scalar(1e-4);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  std::int64_t t = 0;
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;
};

template <typename Scalar>
AdamState<Scalar> make_adam(const std::vector<Parameter<Scalar>*>& params,
                            Scalar lr = Scalar(1e-4)) {
  AdamState<Scalar> st;
  st.lr = lr;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Parameter<Scalar>* p : params) {
    st.m.emplace_back(p->value.shape());
    st.v.emplace_back(p->value.shape());
  }
  return st;
}

template <typename Scalar>
void adam_step(const std::vector<Parameter<Scalar>*>& params, AdamState<Scalar>& st) {
  if (st.m.size() != params.size() || st.v.size() != params.size()) {
    throw ShapeError("adam_step: state not aligned with parameter list");
  }
  st.t += 1;
  const Scalar bc1 = Scalar(1) - static_cast<Scalar>(std::pow(static_cast<double>(st.beta1),
                                                              static_cast<double>(st.t)));
  const Scalar bc2 = Scalar(1) - static_cast<Scalar>(std::pow(static_cast<double>(st.beta2),
                                                              static_cast<double>(st.t)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<Scalar>& p = *params[i];
    auto g = p.grad.array();
    auto m = st.m[i].array();
    auto v = st.v[i].array();
    m = st.beta1 * m + (Scalar(1) - st.beta1) * g;
    v = st.beta2 * v + (Scalar(1) - st.beta2) * g.square();
    p.value.array() -= st.lr * (m / bc1) / ((v / bc2).sqrt() + st.eps);
  }
}

}  // namespace ddsr
