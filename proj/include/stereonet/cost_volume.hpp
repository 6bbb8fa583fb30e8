#pragma once

// Coarse cost volume built by feature differencing and filtered in 3D,
// plus the disparity selection rules that read it.

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "stereonet/layers.hpp"

namespace stereonet {

/// Per-pixel continuous disparity, stored as H x W x 1 so it can flow
/// through the image ops. `level` k means resolution divided by 2^k.
template <typename T>
struct DisparityMap {
  Tensor<T> values;
  int level = 0;

  std::size_t height() const { return values.dim(0); }
  std::size_t width() const { return values.dim(1); }
};

/// Number of coarse candidates for max disparity D at K downsamplings.
inline std::size_t coarse_candidates(int max_disparity, int K) {
  const long denom = 1L << K;
  if (max_disparity < 0 || (max_disparity + 1) % denom != 0) {
    throw Error("cost volume: (D + 1) = " + std::to_string(max_disparity + 1) +
                " must be divisible by 2^K = " + std::to_string(denom));
  }
  return static_cast<std::size_t>((max_disparity + 1) / denom);
}

/// raw[y, x, d, :] = left[y, x, :] - right[y, max(x - d, 0), :].
template <typename T>
Tensor<T> form_cost_volume(const Tensor<T>& left, const Tensor<T>& right,
                           std::size_t candidates) {
  require_shape(left.shape() == right.shape() && left.rank() == 3,
                "form_cost_volume: feature shape mismatch " + to_string(left.shape()) +
                    " vs " + to_string(right.shape()));
  require_shape(candidates >= 1, "form_cost_volume: need at least one candidate");
  const std::size_t h = left.dim(0), w = left.dim(1), c = left.dim(2);
  Tensor<T> raw(Shape{h, w, candidates, c});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const T* l = left.raw() + (y * w + x) * c;
      for (std::size_t d = 0; d < candidates; ++d) {
        const std::size_t xr = x >= d ? x - d : 0;
        const T* r = right.raw() + (y * w + xr) * c;
        T* dst = raw.raw() + ((y * w + x) * candidates + d) * c;
        for (std::size_t k = 0; k < c; ++k) dst[k] = l[k] - r[k];
      }
    }
  }
  return raw;
}

template <typename T>
Var<T> form_cost_volume(Tape<T>& tape, const Var<T>& left, const Var<T>& right,
                        std::size_t candidates) {
  auto raw = form_cost_volume(left.value(), right.value(), candidates);
  return tape.record(std::move(raw), {left, right}, [=] {
    return [=](const Tensor<T>& dy) {
      const std::size_t h = left.shape()[0], w = left.shape()[1], c = left.shape()[2];
      auto* dl = left.grad_buffer();
      auto* dr = right.grad_buffer();
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          for (std::size_t d = 0; d < candidates; ++d) {
            const std::size_t xr = x >= d ? x - d : 0;
            const T* g = dy.raw() + ((y * w + x) * candidates + d) * c;
            if (dl) {
              T* p = dl->raw() + (y * w + x) * c;
              for (std::size_t k = 0; k < c; ++k) p[k] += g[k];
            }
            if (dr) {
              T* p = dr->raw() + (y * w + xr) * c;
              for (std::size_t k = 0; k < c; ++k) p[k] -= g[k];
            }
          }
        }
      }
    };
  });
}

/// Four 3x3x3 conv + BN + leaky ReLU layers, then a linear 3x3x3 conv to
/// one channel.
template <typename T>
struct CostFilterParams {
  std::vector<ConvNormAct<T>> layers;
  ConvLayer<T> final;
  double leaky_alpha = 0.2;

  template <typename F>
  void visit(F&& f) {
    for (auto& l : layers) l.visit(f);
    final.visit(f);
  }
};

template <typename T>
CostFilterParams<T> build_cost_filter(std::size_t channels, Initializer& init,
                                      int num_layers = 4, double leaky_alpha = 0.2) {
  CostFilterParams<T> p;
  p.leaky_alpha = leaky_alpha;
  for (int i = 0; i < num_layers; ++i) {
    const std::string name = "filter.conv" + std::to_string(i);
    p.layers.push_back({ConvLayer<T>::conv3d(name, 3, channels, channels, init),
                        NormLayer<T>::make(name + ".bn", channels)});
  }
  p.final = ConvLayer<T>::conv3d("filter.final", 3, channels, 1, init);
  return p;
}

/// raw H' x W' x D' x C -> filtered H' x W' x D'.
template <typename T>
Var<T> filter_cost_volume(Tape<T>& tape, const Var<T>& raw, CostFilterParams<T>& p) {
  require_shape(raw.shape().size() == 4, "filter_cost_volume: raw volume must be rank 4");
  const T alpha = static_cast<T>(p.leaky_alpha);
  Var<T> x = raw;
  for (auto& l : p.layers) x = l(tape, x, alpha);
  x = p.final(tape, x);
  const auto& s = x.shape();
  return reshape(tape, x, Shape{s[0], s[1], s[2]});
}

template <typename T>
Tensor<T> filter_cost_volume(const Tensor<T>& raw, CostFilterParams<T>& p) {
  Tape<T> tape(false);
  return filter_cost_volume(tape, tape.constant(raw), p).value();
}

/// Index of the lowest cost per pixel; ties go to the smaller disparity.
template <typename T>
DisparityMap<T> hard_argmin(const Tensor<T>& filtered, int level = 0) {
  require_shape(filtered.rank() == 3, "hard_argmin: expected H x W x D costs");
  const std::size_t h = filtered.dim(0), w = filtered.dim(1), n = filtered.dim(2);
  DisparityMap<T> out{Tensor<T>(Shape{h, w, 1}), level};
  for (std::size_t i = 0; i < h * w; ++i) {
    const T* c = filtered.raw() + i * n;
    std::size_t best = 0;
    for (std::size_t d = 1; d < n; ++d) {
      if (c[d] < c[best]) best = d;
    }
    out.values[i] = static_cast<T>(best);
  }
  return out;
}

/// Expected disparity under softmax(-cost), computed with the minimum cost
/// subtracted for stability.
template <typename T>
Tensor<T> soft_argmin(const Tensor<T>& filtered) {
  require_shape(filtered.rank() == 3, "soft_argmin: expected H x W x D costs");
  const std::size_t h = filtered.dim(0), w = filtered.dim(1), n = filtered.dim(2);
  Tensor<T> out(Shape{h, w, 1});
  for (std::size_t i = 0; i < h * w; ++i) {
    const T* c = filtered.raw() + i * n;
    T lo = c[0];
    for (std::size_t d = 1; d < n; ++d) lo = std::min(lo, c[d]);
    T z = 0, acc = 0;
    for (std::size_t d = 0; d < n; ++d) {
      const T e = std::exp(lo - c[d]);
      z += e;
      acc += static_cast<T>(d) * e;
    }
    out[i] = acc / z;
  }
  return out;
}

template <typename T>
Var<T> soft_argmin(Tape<T>& tape, const Var<T>& filtered) {
  auto y = soft_argmin(filtered.value());
  require_finite(y, "soft_argmin");
  auto expect = std::make_shared<Tensor<T>>(y);
  return tape.record(std::move(y), {filtered}, [=] {
    return [=](const Tensor<T>& dy) {
      const auto& c = filtered.value();
      const std::size_t n = c.dim(2);
      auto* dc = filtered.grad_buffer();
      std::vector<T> p(n);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const T* ci = c.raw() + i * n;
        T lo = ci[0];
        for (std::size_t d = 1; d < n; ++d) lo = std::min(lo, ci[d]);
        T z = 0;
        for (std::size_t d = 0; d < n; ++d) z += (p[d] = std::exp(lo - ci[d]));
        const T mean = (*expect)[i];
        // d(mean)/dC_d = -p_d (d - mean)
        for (std::size_t d = 0; d < n; ++d) {
          (*dc)[i * n + d] -= dy[i] * (p[d] / z) * (static_cast<T>(d) - mean);
        }
      }
    };
  });
}

/// Draws d ~ softmax(-cost) independently per pixel. Inference only.
template <typename T>
DisparityMap<T> sample_disparity(const Tensor<T>& filtered, std::uint64_t seed,
                                 int level = 0) {
  require_shape(filtered.rank() == 3, "sample_disparity: expected H x W x D costs");
  const std::size_t h = filtered.dim(0), w = filtered.dim(1), n = filtered.dim(2);
  auto neg = filtered.template cast<double>();
  for (auto& v : neg.data()) v = -v;
  const auto prob = softmax(neg, 2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DisparityMap<T> out{Tensor<T>(Shape{h, w, 1}), level};
  for (std::size_t i = 0; i < h * w; ++i) {
    double r = u(rng), cum = 0.0;
    std::size_t pick = n - 1;
    for (std::size_t d = 0; d < n; ++d) {
      cum += prob[i * n + d];
      if (r < cum) {
        pick = d;
        break;
      }
    }
    out.values[i] = static_cast<T>(pick);
  }
  return out;
}

}  // namespace stereonet
