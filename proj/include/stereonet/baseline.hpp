#pragma once

// Classical matcher: window SAD on luma, winner-takes-all, parabola fit.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "stereonet/cost_volume.hpp"
#include "stereonet/io/sample.hpp"

namespace stereonet {

struct MatchConfig {
  int window = 9;
  int max_disp = 20;

  void validate() const {
    if (window < 1 || window % 2 == 0) throw Error("match: window must be odd and positive");
    if (max_disp < 1) throw Error("match: max_disp must be >= 1");
  }
};

/// Cost assigned where no window pixel has a partner in the right image.
inline constexpr float kNoMatchCost = std::numeric_limits<float>::max();

/// 0.299 R + 0.587 G + 0.114 B, H x W x 3 -> H x W x 1.
inline Tensor<float> to_grayscale(const Tensor<float>& rgb) {
  if (rgb.rank() != 3) throw ShapeError("to_grayscale: need H x W x C");
  if (rgb.dim(2) == 1) return rgb;
  if (rgb.dim(2) != 3) throw ShapeError("to_grayscale: need 1 or 3 channels");
  Tensor<float> g(Shape{rgb.dim(0), rgb.dim(1), 1});
  for (std::size_t p = 0; p < g.size(); ++p) {
    g[p] = 0.299f * rgb[3 * p] + 0.587f * rgb[3 * p + 1] + 0.114f * rgb[3 * p + 2];
  }
  return g;
}

struct MatchResult {
  DisparityMap<float> disparity;  // integer valued
  Tensor<float> costs;            // H x W x (max_disp + 1)
};

/// Mean absolute difference over the part of the window where both the left
/// pixel and its partner x - d exist, for every d in [0, max_disp].
inline MatchResult wta_match(const Tensor<float>& left, const Tensor<float>& right,
                             const MatchConfig& cfg) {
  cfg.validate();
  const Tensor<float> l = to_grayscale(left), r = to_grayscale(right);
  require_shape(l.shape() == r.shape(), "wta_match: left/right size mismatch");
  const std::size_t h = l.dim(0), w = l.dim(1);
  const std::size_t win = static_cast<std::size_t>(cfg.window);
  if (win > h || win > w) throw Error("wta_match: window larger than image");
  const long rad = cfg.window / 2;
  const std::size_t nd = static_cast<std::size_t>(cfg.max_disp) + 1;

  MatchResult out{{Tensor<float>(Shape{h, w, 1}), 0}, Tensor<float>(Shape{h, w, nd})};
  // Integral images of |L - R_d| and of the validity indicator, (h+1) x (w+1).
  std::vector<double> sad((h + 1) * (w + 1)), cnt((h + 1) * (w + 1));
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t y = 0; y < h; ++y) {
      double row_s = 0, row_c = 0;
      for (std::size_t x = 0; x < w; ++x) {
        if (x >= d) {
          row_s += std::abs(double(l[y * w + x]) - double(r[y * w + x - d]));
          row_c += 1;
        }
        sad[(y + 1) * (w + 1) + x + 1] = sad[y * (w + 1) + x + 1] + row_s;
        cnt[(y + 1) * (w + 1) + x + 1] = cnt[y * (w + 1) + x + 1] + row_c;
      }
    }
    for (long y = 0; y < long(h); ++y) {
      const long y0 = std::max(0L, y - rad), y1 = std::min(long(h), y + rad + 1);
      for (long x = 0; x < long(w); ++x) {
        const long x0 = std::max(0L, x - rad), x1 = std::min(long(w), x + rad + 1);
        auto box = [&](const std::vector<double>& s) {
          return s[y1 * (w + 1) + x1] - s[y0 * (w + 1) + x1] - s[y1 * (w + 1) + x0] +
                 s[y0 * (w + 1) + x0];
        };
        const double n = box(cnt);
        out.costs[(y * w + x) * nd + d] =
            n > 0.5 ? static_cast<float>(box(sad) / n) : kNoMatchCost;
      }
    }
  }
  for (std::size_t p = 0; p < h * w; ++p) {
    const float* c = out.costs.raw() + p * nd;
    std::size_t best = 0;
    for (std::size_t d = 1; d < nd; ++d)
      if (c[d] < c[best]) best = d;
    out.disparity.values[p] = static_cast<float>(best);
  }
  return out;
}

/// Offset of the vertex of the parabola through (-1, cm), (0, c0), (1, cp),
/// clamped to [-0.5, 0.5]; 0 when the curvature is degenerate.
inline double parabola_offset(double cm, double c0, double cp) {
  const double denom = cm - 2.0 * c0 + cp;
  if (denom <= 1e-12) return 0.0;
  return std::clamp((cm - cp) / (2.0 * denom), -0.5, 0.5);
}

/// Subpixel disparity around integer minimum d of one pixel's cost curve.
/// Returns d unchanged at the range ends, next to unmatched candidates, and
/// for an exact (zero-cost) match.
inline double parabola_refine(std::span<const float> curve, std::size_t d) {
  if (d == 0 || d + 1 >= curve.size()) return double(d);
  const float cm = curve[d - 1], c0 = curve[d], cp = curve[d + 1];
  if (cm == kNoMatchCost || cp == kNoMatchCost || c0 == 0.0f) return double(d);
  return double(d) + parabola_offset(cm, c0, cp);
}

inline DisparityMap<float> classical_pipeline(const Tensor<float>& left,
                                              const Tensor<float>& right,
                                              const MatchConfig& cfg) {
  auto m = wta_match(left, right, cfg);
  const std::size_t nd = m.costs.dim(2);
  for (std::size_t p = 0; p < m.disparity.values.size(); ++p) {
    std::span<const float> curve(m.costs.raw() + p * nd, nd);
    m.disparity.values[p] = static_cast<float>(
        parabola_refine(curve, static_cast<std::size_t>(m.disparity.values[p])));
  }
  return m.disparity;
}

inline DisparityMap<float> classical_pipeline(const StereoSample& s, const MatchConfig& cfg) {
  return classical_pipeline(s.left, s.right, cfg);
}

/// Pixels whose whole window and whole disparity search stay inside both
/// images: x - r - max_disp >= 0, x + r < W, r <= y < H - r.
inline Mask interior_mask(std::size_t h, std::size_t w, const MatchConfig& cfg) {
  Mask m(Shape{h, w, 1});
  const long r = cfg.window / 2;
  for (long y = r; y < long(h) - r; ++y)
    for (long x = r + cfg.max_disp; x < long(w) - r; ++x) m[y * w + x] = 1;
  return m;
}

}  // namespace stereonet
