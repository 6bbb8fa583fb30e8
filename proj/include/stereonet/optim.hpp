#pragma once

#include <cmath>
#include <vector>

#include "stereonet/autograd.hpp"

namespace stereonet {

/// RMSProp accumulators, one per parameter, in parameter visit order.
template <typename T>
struct OptState {
  double decay = 0.9;
  double epsilon = 1e-8;
  std::vector<Tensor<T>> accumulators;

  void init(const std::vector<Param<T>*>& params) {
    accumulators.clear();
    for (auto* p : params) accumulators.emplace_back(p->value.shape());
  }
};

/// acc <- decay * acc + (1 - decay) * g^2;  p <- p - lr * g / sqrt(acc + eps)
template <typename T>
void rmsprop_step(const std::vector<Param<T>*>& params, OptState<T>& state, double lr) {
  if (state.accumulators.size() != params.size()) state.init(params);
  const double keep = state.decay, mix = 1.0 - state.decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& acc = state.accumulators[k];
    if (acc.shape() != p.value.shape()) throw ShapeError("rmsprop: accumulator shape mismatch");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      const double a = keep * acc[i] + mix * g * g;
      acc[i] = static_cast<T>(a);
      p.value[i] = static_cast<T>(p.value[i] - lr * g / std::sqrt(a + state.epsilon));
    }
  }
}

struct Schedule {
  double lr0 = 1e-3;
  double decay_rate = 0.9;
  double decay_steps = 100;
};

/// lr0 * decay_rate^(step / decay_steps)
inline double lr_schedule(long step, const Schedule& s) {
  return s.lr0 * std::pow(s.decay_rate, static_cast<double>(step) / s.decay_steps);
}

}  // namespace stereonet
