#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "swd/params.hpp"
#include "swd/tensor.hpp"

namespace swd {

// Adam with bias correction. Moments live beside the parameters keyed by
// name, so they serialize into the checkpoint alongside them.
template <typename T>
struct AdamState {
  std::map<std::string, std::vector<T>> m, v;
  int64_t t = 0;
};

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  // Abort before mutating anything if any gradient is non-finite.
  for (auto& p : params) {
    if (p.grad().size() != p.numel())
      throw std::invalid_argument("adam_step: parameter '" + p.name() + "' has no gradient");
    for (T g : p.grad())
      if (!std::isfinite(static_cast<double>(g)))
        throw NumericError("adam_step: non-finite gradient for parameter '" + p.name() +
                           "'; step aborted");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (auto& p : params) {
    auto& m = state.m[p.name()];
    auto& v = state.v[p.name()];
    if (m.size() != p.numel()) m.assign(p.numel(), T(0));
    if (v.size() != p.numel()) v.assign(p.numel(), T(0));
    auto& vals = p.mutable_val();
    const auto& grads = p.grad();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double g = static_cast<double>(grads[i]);
      const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
      const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      vals[i] = static_cast<T>(static_cast<double>(vals[i]) -
                               lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

}  // namespace swd
