#pragma once

#include <functional>
#include <vector>

#include "omnifd/core/ops.hpp"
#include "omnifd/core/rng.hpp"
#include "omnifd/model/params.hpp"

namespace omnifd::testing {

inline Tensor random_tensor(std::vector<long> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (long i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, scale);
  return t;
}

// Central finite differences of a scalar-valued function w.r.t. one leaf,
// compared against the analytic gradient from backward().
// Returns the worst relative error over all entries. Entries whose
// gradient magnitude sits below the denominator floor are effectively
// compared absolutely (|a - n| <= floor * tolerance), which keeps
// double-precision FD cancellation noise out of the ratio.
inline double grad_check(const std::function<Value()>& forward, Value leaf, double eps = 1e-5) {
  GradMap sink;
  Value loss = forward();
  backward(loss, sink);
  const Tensor* analytic = sink.find(leaf.node());
  Tensor zero(leaf.val().shape());
  if (!analytic) analytic = &zero;

  double worst = 0.0;
  Tensor& data = leaf.mutable_val();
  for (long i = 0; i < data.numel(); ++i) {
    const double orig = data[i];
    data[i] = orig + eps;
    const double hi = forward().val()[0];
    data[i] = orig - eps;
    const double lo = forward().val()[0];
    data[i] = orig;
    const double numeric = (hi - lo) / (2 * eps);
    const double denom = std::max({std::fabs(numeric), std::fabs((*analytic)[i]), 1e-4});
    worst = std::max(worst, std::fabs(numeric - (*analytic)[i]) / denom);
  }
  return worst;
}

// Sum of all parameter gradients checked against finite differences; walks
// every parameter in the store.
inline double grad_check_params(const std::function<Value()>& forward, ParamStore& ps, double eps = 1e-5) {
  double worst = 0.0;
  for (const auto& [name, value] : ps.all()) {
    Value leaf = value;
    worst = std::max(worst, grad_check(forward, leaf, eps));
  }
  return worst;
}

}  // namespace omnifd::testing
