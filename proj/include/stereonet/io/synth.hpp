#pragma once

// Synthetic rectified pairs with exact, continuous ground truth. The scene
// is a textured surface seen by the left camera; the right view samples the
// same texture shifted by the visible surface's disparity.

#include <algorithm>
#include <cmath>
#include <random>
#include <variant>
#include <vector>

#include "stereonet/io/sample.hpp"

namespace stereonet {

struct ConstantField {
  double d = 0.0;
};

/// d(x, y) = offset + gx * x + gy * y
struct RampField {
  double offset = 0.0;
  double gx = 0.0;
  double gy = 0.0;
};

/// Axis-aligned fronto-parallel rectangle [x0, x1) x [y0, y1) in left-image
/// coordinates.
struct Block {
  double x0, y0, x1, y1;
  double d;
};

struct BlocksField {
  double background = 0.0;
  std::vector<Block> blocks;
};

using DisparityField = std::variant<ConstantField, RampField, BlocksField>;

struct SynthSpec {
  std::size_t width = 128;
  std::size_t height = 64;
  DisparityField field = ConstantField{};
  double blur_sigma = 1.0;    // texture band limit, pixels
  double noise_sigma = 0.0;   // additive sensor noise on both views, gray levels
  double contrast = 45.0;     // texture standard deviation, gray levels
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0) return {1.0};
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double s = 0;
  for (int i = -r; i <= r; ++i) s += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= s;
  return k;
}

/// Separable blur with mirrored borders on an h x w single-channel plane.
inline std::vector<double> blur_plane(const std::vector<double>& src, std::size_t h,
                                      std::size_t w, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  auto mirror = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  std::vector<double> tmp(src.size()), out(src.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * src[y * w + mirror(long(x) + i, long(w))];
      tmp[y * w + x] = s;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp[mirror(long(y) + i, long(h)) * w + x];
      out[y * w + x] = s;
    }
  return out;
}

/// Rescales a plane to mean 127.5 and standard deviation `spread`.
inline void standardize(std::vector<double>& p, double spread) {
  double mean = 0, var = 0;
  for (double v : p) mean += v;
  mean /= static_cast<double>(p.size());
  for (double v : p) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(p.size()));
  for (double& v : p) v = 127.5 + spread * (v - mean) / (sd > 0 ? sd : 1.0);
}

struct FieldEval {
  const SynthSpec& spec;

  double left(double x, double y) const {
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, ConstantField>) {
            return f.d;
          } else if constexpr (std::is_same_v<F, RampField>) {
            return f.offset + f.gx * x + f.gy * y;
          } else {
            double d = f.background;
            for (const auto& b : f.blocks)
              if (x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1) d = std::max(d, b.d);
            return d;
          }
        },
        spec.field);
  }

  /// Disparity of the surface visible at right-image column xr.
  double right(double xr, double y) const {
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, ConstantField>) {
            return f.d;
          } else if constexpr (std::is_same_v<F, RampField>) {
            // xr = x - d(x)  =>  d = (offset + gx xr + gy y) / (1 - gx)
            return (f.offset + f.gx * xr + f.gy * y) / (1.0 - f.gx);
          } else {
            double d = f.background;
            for (const auto& b : f.blocks) {
              const double xl = xr + b.d;
              if (xl >= b.x0 && xl < b.x1 && y >= b.y0 && y < b.y1) d = std::max(d, b.d);
            }
            return d;
          }
        },
        spec.field);
  }
};

}  // namespace detail

/// Range of the field's disparity over the left image.
inline std::pair<double, double> disparity_range(const SynthSpec& spec) {
  detail::FieldEval f{spec};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t y = 0; y < spec.height; ++y)
    for (std::size_t x = 0; x < spec.width; ++x) {
      const double d = f.left(double(x), double(y));
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  return {lo, hi};
}

inline StereoSample synth_pair(const SynthSpec& spec) {
  if (spec.width < 4 || spec.height < 1) throw Error("synth_pair: image too small");
  if (const auto* r = std::get_if<RampField>(&spec.field); r && std::abs(r->gx) >= 0.5) {
    throw Error("synth_pair: ramp x-gradient must satisfy |gx| < 0.5");
  }
  const auto [lo, hi] = disparity_range(spec);
  if (lo < 0.0) throw Error("synth_pair: negative disparity " + std::to_string(lo));
  if (hi >= static_cast<double>(spec.width) / 4.0) {
    throw Error("synth_pair: disparity " + std::to_string(hi) + " not below width/4 = " +
                std::to_string(static_cast<double>(spec.width) / 4.0));
  }

  const std::size_t h = spec.height, w = spec.width;
  // Texture wide enough that every right-view lookup x + d stays inside;
  // a ramp extrapolated past the left image grows by at most 1 / (1 - gx) < 2.
  const std::size_t tw = w + static_cast<std::size_t>(std::ceil(2.0 * hi)) + 2;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noise_plane = [&] {
    std::vector<double> p(h * tw);
    for (auto& v : p) v = gauss(rng);
    return detail::blur_plane(p, h, tw, spec.blur_sigma);
  };
  auto luma = noise_plane();
  detail::standardize(luma, spec.contrast);
  std::vector<std::vector<double>> tex(3);
  for (auto& c : tex) {
    c = noise_plane();
    detail::standardize(c, 0.45 * spec.contrast);
  }
  for (std::size_t i = 0; i < h * tw; ++i)
    for (auto& c : tex) c[i] = std::clamp(luma[i] + (c[i] - 127.5), 0.0, 255.0);

  StereoSample s;
  s.left = Tensor<float>(Shape{h, w, 3});
  s.right = Tensor<float>(Shape{h, w, 3});
  s.gt_left = Tensor<float>(Shape{h, w, 1});
  s.valid_left = Mask(Shape{h, w, 1});
  Tensor<float> gt_right(Shape{h, w, 1});
  Mask valid_right(Shape{h, w, 1});

  detail::FieldEval field{spec};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      for (std::size_t c = 0; c < 3; ++c) s.left[p * 3 + c] = float(tex[c][y * tw + x]);
      const double d = field.left(double(x), double(y));
      s.gt_left[p] = static_cast<float>(d);
      s.valid_left[p] = double(x) - d >= 0.0;

      const double dr = field.right(double(x), double(y));
      const double xs = double(x) + dr;
      const auto x0 = static_cast<std::size_t>(std::floor(xs));
      const double f = xs - double(x0);
      const std::size_t x1 = std::min(x0 + 1, tw - 1);
      for (std::size_t c = 0; c < 3; ++c) {
        const double a = tex[c][y * tw + x0], b = tex[c][y * tw + x1];
        s.right[p * 3 + c] = static_cast<float>(f == 0.0 ? a : (1.0 - f) * a + f * b);
      }
      gt_right[p] = static_cast<float>(dr);
      valid_right[p] = xs <= double(w - 1);
    }
  }
  if (spec.noise_sigma > 0) {
    std::normal_distribution<double> sensor(0.0, spec.noise_sigma);
    for (auto* img : {&s.left, &s.right})
      for (auto& v : img->data()) v = static_cast<float>(std::clamp(v + sensor(rng), 0.0, 255.0));
  }
  s.gt_right = std::move(gt_right);
  s.valid_right = std::move(valid_right);
  return s;
}

/// Random constant or ramp scene with disparities inside [0, max_disp].
inline SynthSpec random_synth_spec(std::mt19937_64& rng, std::size_t width, std::size_t height,
                                   double max_disp, bool ramp, double noise_sigma = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SynthSpec s;
  s.width = width;
  s.height = height;
  s.noise_sigma = noise_sigma;
  s.seed = rng();
  if (!ramp) {
    s.field = ConstantField{u(rng) * max_disp};
    return s;
  }
  // Pick the values at two opposite corners and a vertical slope, all in range.
  const double a = u(rng) * max_disp, b = u(rng) * max_disp;
  const double gx = (b - a) / double(width - 1);
  const double span_y = (u(rng) - 0.5) * 0.5 * max_disp;
  double gy = span_y / double(height - 1);
  const double lo = std::min(a, b), hi = std::max(a, b);
  // Keep every pixel inside [0, max_disp].
  if (lo + std::min(0.0, span_y) < 0 || hi + std::max(0.0, span_y) > max_disp) gy = 0;
  s.field = RampField{a, gx, gy};
  return s;
}

}  // namespace stereonet
