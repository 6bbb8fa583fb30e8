#pragma once

// Edge-aware residual refinement: each refiner looks at the upsampled
// disparity next to the color guide and predicts a disparity residual.

#include <cmath>
#include <string>
#include <vector>

#include "stereonet/cost_volume.hpp"
#include "stereonet/layers.hpp"

namespace stereonet {

enum class RefinementMode { kMulti, kSingle };

inline const char* to_string(RefinementMode m) {
  return m == RefinementMode::kMulti ? "multi" : "single";
}

inline RefinementMode parse_refinement_mode(const std::string& s) {
  if (s == "multi") return RefinementMode::kMulti;
  if (s == "single") return RefinementMode::kSingle;
  throw Error("unknown refinement mode '" + s + "' (expected multi or single)");
}

inline const std::vector<int>& refiner_dilations() {
  static const std::vector<int> d{1, 2, 4, 8, 1, 1};
  return d;
}

template <typename T>
struct RefinerParams {
  ConvLayer<T> entry;
  std::vector<ResBlock<T>> blocks;
  ConvLayer<T> final;
  double leaky_alpha = 0.2;

  template <typename F>
  void visit(F&& f) {
    entry.visit(f);
    for (auto& b : blocks) b.visit(f);
    final.visit(f);
  }
};

/// `residual_gain` scales the init std of the last conv, so an untrained
/// refiner starts close to a pass-through.
template <typename T>
RefinerParams<T> build_refiner(const std::string& name, std::size_t channels,
                               Initializer& init, double residual_gain = 1.0) {
  RefinerParams<T> p;
  p.entry = ConvLayer<T>::conv2d(name + ".entry", 3, 4, channels, 1, 1, init);
  int i = 0;
  for (int dil : refiner_dilations()) {
    p.blocks.push_back(ResBlock<T>::make(name + ".res" + std::to_string(i++), channels, dil, init));
  }
  p.final = ConvLayer<T>::conv2d(name + ".final", 3, channels, 1, 1, 1, init, residual_gain);
  return p;
}

/// Extent of resolution level k for a full-resolution extent n.
inline std::size_t level_extent(std::size_t n, int k) {
  const std::size_t f = std::size_t{1} << k;
  return (n + f - 1) / f;
}

/// Bilinear resize of a disparity map to (out_h, out_w) that also rescales
/// the values by the width ratio, keeping them in pixels of the new grid.
template <typename T>
Var<T> upsample_disparity(Tape<T>& tape, const Var<T>& d, std::size_t out_h,
                          std::size_t out_w) {
  const std::size_t in_w = d.shape()[1];
  if (d.shape()[0] == out_h && in_w == out_w) return d;
  auto up = bilinear_resize(tape, d, out_h, out_w);
  return scale(tape, up, static_cast<T>(static_cast<double>(out_w) / static_cast<double>(in_w)));
}

template <typename T>
DisparityMap<T> upsample_disparity(const DisparityMap<T>& d, int factor) {
  if (factor < 1) throw Error("upsample_disparity: factor must be >= 1");
  if (factor == 1) return d;
  Tape<T> tape(false);
  auto v = upsample_disparity(tape, tape.constant(d.values), d.height() * factor,
                              d.width() * factor);
  int levels = 0;
  while ((1 << levels) < factor) ++levels;
  return {v.value(), d.level - levels};
}

/// output = ReLU(d_up + norm * r), where r is the network output for the
/// input [guide, d_up / norm]. `norm` converts level pixels to the
/// network's normalized disparity units.
template <typename T>
Var<T> refine(Tape<T>& tape, const Var<T>& d_up, const Var<T>& guide,
              RefinerParams<T>& p, T norm) {
  require_shape(d_up.shape().size() == 3 && d_up.shape()[2] == 1,
                "refine: disparity must be H x W x 1");
  require_shape(guide.shape().size() == 3 && guide.shape()[2] == 3,
                "refine: guide must be H x W x 3");
  require_shape(guide.shape()[0] == d_up.shape()[0] && guide.shape()[1] == d_up.shape()[1],
                "refine: resolution mismatch between disparity " + to_string(d_up.shape()) +
                    " and guide " + to_string(guide.shape()));
  const T alpha = static_cast<T>(p.leaky_alpha);
  auto x = concat_channels(tape, guide, scale(tape, d_up, T{1} / norm));
  x = p.entry(tape, x);
  for (auto& b : p.blocks) x = b(tape, x, alpha);
  auto r = p.final(tape, x);
  return relu(tape, add(tape, d_up, scale(tape, r, norm)));
}

struct HierarchyShape {
  int K = 3;
  std::size_t candidates = 24;  // D'
  RefinementMode mode = RefinementMode::kMulti;

  std::size_t refiner_count() const {
    return mode == RefinementMode::kMulti ? static_cast<std::size_t>(K) : 1;
  }
  /// Level pixels -> normalized units: coarse pixels divided by D'.
  double disparity_norm(int level) const {
    return static_cast<double>(std::size_t{1} << (K - level)) * static_cast<double>(candidates);
  }
};

/// Returns the coarse map followed by each refined map, coarse to fine.
/// `color` is the full-resolution normalized image.
template <typename T>
std::vector<Var<T>> hierarchical_refine(Tape<T>& tape, const Var<T>& coarse,
                                        const Var<T>& color,
                                        std::vector<RefinerParams<T>>& refiners,
                                        const HierarchyShape& shape,
                                        const std::function<void(int)>& on_level = {}) {
  if (refiners.size() != shape.refiner_count()) {
    throw Error("hierarchical_refine: " + std::string(to_string(shape.mode)) + " mode needs " +
                std::to_string(shape.refiner_count()) + " refiners, got " +
                std::to_string(refiners.size()));
  }
  const std::size_t h = color.shape()[0], w = color.shape()[1];
  std::vector<Var<T>> maps{coarse};
  Var<T> d = coarse;
  std::vector<int> levels;
  if (shape.mode == RefinementMode::kMulti) {
    for (int k = shape.K - 1; k >= 0; --k) levels.push_back(k);
  } else {
    levels.push_back(0);
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const int k = levels[i];
    const std::size_t lh = level_extent(h, k), lw = level_extent(w, k);
    auto d_up = upsample_disparity(tape, d, lh, lw);
    auto guide = bilinear_resize(tape, color, lh, lw);
    d = refine(tape, d_up, guide, refiners[i], static_cast<T>(shape.disparity_norm(k)));
    maps.push_back(d);
    if (on_level) on_level(k);
  }
  return maps;
}

}  // namespace stereonet
