#pragma once

#include <cmath>

#include "dmvc/error.hpp"
#include "dmvc/numgrad/param_store.hpp"

namespace dmvc::ng {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam descent step on every trainable parameter.
/// Increments the store's step counter; gradients are left untouched.
inline void adam_step(ParamStore& params, const AdamOptions& opt) {
  if (!(opt.learning_rate > 0.0)) throw UsageError("adam: learning rate must be positive");
  if (!(opt.beta1 > 0.0 && opt.beta1 < 1.0) || !(opt.beta2 > 0.0 && opt.beta2 < 1.0))
    throw UsageError("adam: betas must lie in (0,1)");
  if (opt.epsilon < 0.0) throw UsageError("adam: epsilon must be non-negative");

  params.set_step(params.step() + 1);
  const double t = static_cast<double>(params.step());
  const double correction1 = 1.0 - std::pow(opt.beta1, t);
  const double correction2 = 1.0 - std::pow(opt.beta2, t);

  for (auto& [_, p] : params) {
    if (!p.trainable) continue;
    auto value = p.value.data();
    auto grad = p.grad.data();
    auto m = p.first_moment.data();
    auto v = p.second_moment.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      const double denom = std::sqrt(v_hat) + opt.epsilon;
      if (denom > 0.0) value[i] -= opt.learning_rate * m_hat / denom;
    }
  }
}

}  // namespace dmvc::ng
