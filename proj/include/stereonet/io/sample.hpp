#pragma once

#include <optional>

#include "stereonet/cost_volume.hpp"
#include "stereonet/loss.hpp"

namespace stereonet {

/// One rectified pair with ground truth. Images are raw color in [0, 255].
struct StereoSample {
  Tensor<float> left;
  Tensor<float> right;
  Tensor<float> gt_left;                 // H x W x 1
  Mask valid_left;                       // H x W x 1
  std::optional<Tensor<float>> gt_right;
  std::optional<Mask> valid_right;
  std::optional<Mask> nocc;              // non-occluded subset of valid_left

  std::size_t height() const { return left.dim(0); }
  std::size_t width() const { return left.dim(1); }
};

/// x / 127.5 - 1. Apply once: the map is not idempotent.
template <typename T>
Tensor<T> normalize(const Tensor<T>& image) {
  Tensor<T> out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = image[i] / static_cast<T>(127.5) - T{1};
  }
  return out;
}

/// Mask of finite, non-negative ground-truth values.
inline Mask finite_mask(const Tensor<float>& gt) {
  Mask m(Shape{gt.dim(0), gt.dim(1), 1});
  for (std::size_t i = 0; i < gt.size(); ++i) m[i] = std::isfinite(gt[i]) && gt[i] >= 0.0f;
  return m;
}

}  // namespace stereonet
