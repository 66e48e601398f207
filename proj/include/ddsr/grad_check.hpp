#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ddsr/rng.hpp"
#include "ddsr/tensor.hpp"

namespace ddsr {

struct GradCheckResult {
  double max_rel_error = 0.0;
  Index coords_checked = 0;
  // worst offender, for diagnostics
  std::string worst_param;
  Index worst_coord = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

inline double grad_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

// Central-difference check of analytic gradients, run at 64-bit precision.
// `eval(with_grad)` returns the loss; with_grad=true must also zero the
// parameter grads, rebuild the forward graph and run backward.
template <typename Eval>
GradCheckResult grad_check(const std::vector<Parameter<double>*>& params, Eval&& eval,
                           int n_samples, std::uint64_t seed, double h = 1e-5) {
  const double base = eval(true);
  if (!std::isfinite(base)) throw DivergenceError("grad_check: non-finite loss");

  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  Index total = 0;
  for (const Parameter<double>* p : params) {
    analytic.push_back(p->grad);
    total += p->value.size();
  }
  if (total == 0) throw ShapeError("grad_check: no parameter coordinates");

  GradCheckResult res;
  Rng rng(seed);
  for (int k = 0; k < n_samples; ++k) {
    Index flat = static_cast<Index>(rng.index(static_cast<std::uint64_t>(total)));
    std::size_t pi = 0;
    while (flat >= params[pi]->value.size()) {
      flat -= params[pi]->value.size();
      ++pi;
    }
    double& coord = params[pi]->value[flat];
    const double saved = coord;
    coord = saved + h;
    const double lp = eval(false);
    coord = saved - h;
    const double lm = eval(false);
    coord = saved;
    if (!std::isfinite(lp) || !std::isfinite(lm)) {
      throw DivergenceError("grad_check: non-finite loss at perturbed coordinate");
    }
    const double numeric = (lp - lm) / (2.0 * h);
    const double a = analytic[pi][flat];
    const double rel = grad_rel_error(a, numeric);
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_param = params[pi]->name;
      res.worst_coord = flat;
      res.worst_analytic = a;
      res.worst_numeric = numeric;
    }
    ++res.coords_checked;
  }
  return res;
}

}  // namespace ddsr
