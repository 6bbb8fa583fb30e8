#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "stereonet/ops.hpp"
#include "stereonet/refinement.hpp"

namespace stereonet {

/// Per-pixel validity, H x W x 1, nonzero = valid.
using Mask = Tensor<std::uint8_t>;

inline std::size_t mask_count(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

/// Two-parameter robust loss at alpha = 1 (pseudo-Huber / smoothed L1):
/// rho(x) = sqrt((x / c)^2 + 1) - 1.
struct RobustLoss {
  double alpha = 1.0;
  double c = 2.0;

  double operator()(double x) const {
    const double z = x / c;
    return std::sqrt(z * z + 1.0) - 1.0;
  }

  double derivative(double x) const {
    const double z = x / c;
    return z / (c * std::sqrt(z * z + 1.0));
  }
};

/// Mean of rho(pred - gt) over valid pixels, as a scalar on the tape.
template <typename T>
Var<T> masked_robust_mean(Tape<T>& tape, const Var<T>& pred, const Tensor<T>& gt,
                          const Mask& mask, const RobustLoss& rho = {}) {
  require_shape(pred.shape() == gt.shape(), "loss: prediction " + to_string(pred.shape()) +
                                                " does not match ground truth " +
                                                to_string(gt.shape()));
  require_shape(mask.size() == gt.size(), "loss: mask size mismatch");
  const std::size_t n = mask_count(mask);
  if (n == 0) throw Error("loss: empty mask");
  double acc = 0.0;
  const auto& p = pred.value();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (mask[i]) acc += rho(static_cast<double>(p[i]) - static_cast<double>(gt[i]));
  }
  auto y = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  require_finite(y, "loss");
  return tape.record(std::move(y), {pred}, [=] {
    return [=](const Tensor<T>& dy) {
      auto* dp = pred.grad_buffer();
      const auto& pv = pred.value();
      const double k = static_cast<double>(dy[0]) / static_cast<double>(n);
      for (std::size_t i = 0; i < pv.size(); ++i) {
        if (mask[i]) {
          (*dp)[i] += static_cast<T>(
              k * rho.derivative(static_cast<double>(pv[i]) - static_cast<double>(gt[i])));
        }
      }
    };
  });
}

/// Sum over levels of the masked mean robust error, each prediction first
/// upsampled (with value scaling) to the ground-truth resolution.
template <typename T>
Var<T> hierarchical_loss(Tape<T>& tape, const std::vector<Var<T>>& preds,
                         const Tensor<T>& gt, const Mask& mask, const RobustLoss& rho = {}) {
  if (preds.empty()) throw Error("hierarchical_loss: no predictions");
  if (mask_count(mask) == 0) throw Error("hierarchical_loss: empty mask");
  std::vector<Var<T>> terms;
  for (const auto& p : preds) {
    auto up = upsample_disparity(tape, p, gt.dim(0), gt.dim(1));
    terms.push_back(masked_robust_mean(tape, up, gt, mask, rho));
  }
  return add_n(tape, terms);
}

}  // namespace stereonet
