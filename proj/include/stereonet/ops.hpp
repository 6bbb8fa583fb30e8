#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "stereonet/autograd.hpp"
#include "stereonet/tensor.hpp"

namespace stereonet {

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T alpha) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] >= T{0} ? x[i] : alpha * x[i];
  }
  return y;
}

template <typename T>
Var<T> leaky_relu(Tape<T>& tape, const Var<T>& x, T alpha) {
  auto y = leaky_relu(x.value(), alpha);
  require_finite(y, "leaky_relu");
  return tape.record(std::move(y), {x}, [=] {
    return [=](const Tensor<T>& dy) {
      auto* dx = x.grad_buffer();
      const auto& xv = x.value();
      for (std::size_t i = 0; i < dy.size(); ++i) {
        (*dx)[i] += xv[i] >= T{0} ? dy[i] : alpha * dy[i];
      }
    };
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return leaky_relu(x, T{0});
}

template <typename T>
Var<T> relu(Tape<T>& tape, const Var<T>& x) {
  return leaky_relu(tape, x, T{0});
}

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require_shape(a.shape() == b.shape(), "add: shape mismatch " +
                                            to_string(a.shape()) + " vs " +
                                            to_string(b.shape()));
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  require_finite(y, "add");
  return tape.record(std::move(y), {a, b}, [=] {
    return [=](const Tensor<T>& dy) {
      a.accumulate(dy);
      b.accumulate(dy);
    };
  });
}

template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require_shape(a.shape() == b.shape(), "mul: shape mismatch");
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  require_finite(y, "mul");
  return tape.record(std::move(y), {a, b}, [=] {
    return [=](const Tensor<T>& dy) {
      if (auto* da = a.grad_buffer()) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * b.value()[i];
      }
      if (auto* db = b.grad_buffer()) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i] * a.value()[i];
      }
    };
  });
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& x, T s) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s * x.value()[i];
  require_finite(y, "scale");
  return tape.record(std::move(y), {x}, [=] {
    return [=](const Tensor<T>& dy) {
      auto* dx = x.grad_buffer();
      for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += s * dy[i];
    };
  });
}

template <typename T>
Var<T> sum(Tape<T>& tape, const Var<T>& x) {
  double acc = 0.0;
  for (T v : x.value().data()) acc += static_cast<double>(v);
  auto y = Tensor<T>::scalar(static_cast<T>(acc));
  require_finite(y, "sum");
  return tape.record(std::move(y), {x}, [=] {
    return [=](const Tensor<T>& dy) {
      auto* dx = x.grad_buffer();
      for (auto& g : dx->data()) g += dy[0];
    };
  });
}

/// Sum of a list of scalars.
template <typename T>
Var<T> add_n(Tape<T>& tape, const std::vector<Var<T>>& terms) {
  if (terms.empty()) throw Error("add_n: no terms");
  Var<T> acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(tape, acc, terms[i]);
  return acc;
}

/// Same data viewed with a different shape of equal size.
template <typename T>
Var<T> reshape(Tape<T>& tape, const Var<T>& x, Shape shape) {
  require_shape(shape_size(shape) == x.value().size(),
                "reshape: size mismatch " + to_string(x.shape()) + " -> " + to_string(shape));
  return tape.record(x.value().reshaped(std::move(shape)), {x}, [=] {
    return [=](const Tensor<T>& dy) { x.accumulate(dy); };
  });
}

// ---------------------------------------------------------------------------
// Batch normalization over every axis except the last (channel) axis, using
// the statistics of the current call.

namespace detail {

template <typename T>
struct NormCache {
  std::vector<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
Tensor<T> batch_norm_impl(const Tensor<T>& x, const Tensor<T>& gamma,
                          const Tensor<T>& beta, double eps, NormCache<T>* cache) {
  require_shape(x.rank() >= 1, "batch_norm: rank-0 input");
  const std::size_t c = x.shape().back();
  require_shape(gamma.size() == c && beta.size() == c,
                "batch_norm: channel-count mismatch, input has " +
                    std::to_string(c) + " channels, gamma/beta have " +
                    std::to_string(gamma.size()) + "/" + std::to_string(beta.size()));
  const std::size_t n = x.size() / c;
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) mean[ch] += x[i * c + ch];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = x[i * c + ch] - mean[ch];
      var[ch] += d * d;
    }
  }
  std::vector<T> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] / static_cast<double>(n) + eps));
  }
  Tensor<T> y(x.shape());
  std::vector<T> xhat(cache ? x.size() : 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T h = static_cast<T>(x[i * c + ch] - mean[ch]) * inv_std[ch];
      if (cache) xhat[i * c + ch] = h;
      y[i * c + ch] = gamma[ch] * h + beta[ch];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

}  // namespace detail

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps = 1e-3) {
  auto y = detail::batch_norm_impl<T>(x, gamma, beta, eps, nullptr);
  require_finite(y, "batch_norm");
  return y;
}

template <typename T>
Var<T> batch_norm(Tape<T>& tape, const Var<T>& x, const Var<T>& gamma,
                  const Var<T>& beta, double eps = 1e-3) {
  auto cache = std::make_shared<detail::NormCache<T>>();
  auto y = detail::batch_norm_impl<T>(x.value(), gamma.value(), beta.value(),
                                      eps, cache.get());
  require_finite(y, "batch_norm");
  return tape.record(std::move(y), {x, gamma, beta}, [=] {
    return [=](const Tensor<T>& dy) {
      const std::size_t c = gamma.value().size();
      const std::size_t n = dy.size() / c;
      std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
      const auto& xhat = cache->xhat;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          sum_dy[ch] += dy[i * c + ch];
          sum_dy_xhat[ch] += dy[i * c + ch] * xhat[i * c + ch];
        }
      }
      if (auto* dg = gamma.grad_buffer()) {
        for (std::size_t ch = 0; ch < c; ++ch) (*dg)[ch] += static_cast<T>(sum_dy_xhat[ch]);
      }
      if (auto* dbeta = beta.grad_buffer()) {
        for (std::size_t ch = 0; ch < c; ++ch) (*dbeta)[ch] += static_cast<T>(sum_dy[ch]);
      }
      if (auto* dx = x.grad_buffer()) {
        const auto& g = gamma.value();
        std::vector<T> k(c), m1(c), m2(c);
        for (std::size_t ch = 0; ch < c; ++ch) {
          k[ch] = g[ch] * cache->inv_std[ch];
          m1[ch] = static_cast<T>(sum_dy[ch] / static_cast<double>(n));
          m2[ch] = static_cast<T>(sum_dy_xhat[ch] / static_cast<double>(n));
        }
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t j = i * c + ch;
            (*dx)[j] += k[ch] * (dy[j] - m1[ch] - xhat[j] * m2[ch]);
          }
        }
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Bilinear resize of H x W x C maps. Source coordinate for destination index
// j is (j + 0.5) * in / out - 0.5, clamped to [0, in - 1].

namespace detail {

struct ResizeTap {
  std::size_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

inline std::vector<ResizeTap> resize_taps(std::size_t in, std::size_t out) {
  std::vector<ResizeTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t j = 0; j < out; ++j) {
    double s = (static_cast<double>(j) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[j] = {i0, i1, s - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace detail

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  require_shape(x.rank() == 3, "bilinear_resize: input must be H x W x C");
  require_shape(out_h >= 1 && out_w >= 1, "bilinear_resize: output extents must be >= 1");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (h == out_h && w == out_w) return x;
  const auto ty = detail::resize_taps(h, out_h);
  const auto tx = detail::resize_taps(w, out_w);
  Tensor<T> y(Shape{out_h, out_w, c});
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const auto& a = ty[oy];
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const auto& b = tx[ox];
      const T w00 = static_cast<T>((1 - a.w1) * (1 - b.w1));
      const T w01 = static_cast<T>((1 - a.w1) * b.w1);
      const T w10 = static_cast<T>(a.w1 * (1 - b.w1));
      const T w11 = static_cast<T>(a.w1 * b.w1);
      const T* p00 = x.raw() + (a.i0 * w + b.i0) * c;
      const T* p01 = x.raw() + (a.i0 * w + b.i1) * c;
      const T* p10 = x.raw() + (a.i1 * w + b.i0) * c;
      const T* p11 = x.raw() + (a.i1 * w + b.i1) * c;
      T* dst = y.raw() + (oy * out_w + ox) * c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        dst[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
      }
    }
  }
  return y;
}

template <typename T>
Var<T> bilinear_resize(Tape<T>& tape, const Var<T>& x, std::size_t out_h,
                       std::size_t out_w) {
  auto y = bilinear_resize(x.value(), out_h, out_w);
  require_finite(y, "bilinear_resize");
  return tape.record(std::move(y), {x}, [=] {
    return [=](const Tensor<T>& dy) {
      auto* dx = x.grad_buffer();
      const std::size_t h = x.shape()[0], w = x.shape()[1], c = x.shape()[2];
      if (h == out_h && w == out_w) {
        x.accumulate(dy);
        return;
      }
      const auto ty = detail::resize_taps(h, out_h);
      const auto tx = detail::resize_taps(w, out_w);
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const auto& a = ty[oy];
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const auto& b = tx[ox];
          const T w00 = static_cast<T>((1 - a.w1) * (1 - b.w1));
          const T w01 = static_cast<T>((1 - a.w1) * b.w1);
          const T w10 = static_cast<T>(a.w1 * (1 - b.w1));
          const T w11 = static_cast<T>(a.w1 * b.w1);
          const T* g = dy.raw() + (oy * out_w + ox) * c;
          T* p00 = dx->raw() + (a.i0 * w + b.i0) * c;
          T* p01 = dx->raw() + (a.i0 * w + b.i1) * c;
          T* p10 = dx->raw() + (a.i1 * w + b.i0) * c;
          T* p11 = dx->raw() + (a.i1 * w + b.i1) * c;
          for (std::size_t ch = 0; ch < c; ++ch) {
            p00[ch] += w00 * g[ch];
            p01[ch] += w01 * g[ch];
            p10[ch] += w10 * g[ch];
            p11[ch] += w11 * g[ch];
          }
        }
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Softmax along one axis, max-subtracted.

namespace detail {

struct AxisLayout {
  std::size_t outer, len, inner;
};

inline AxisLayout axis_layout(const Shape& s, std::size_t axis) {
  require_shape(axis < s.size(), "softmax: axis out of range");
  AxisLayout l{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) l.inner *= s[i];
  return l;
}

}  // namespace detail

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const auto l = detail::axis_layout(x.shape(), axis);
  Tensor<T> y(x.shape());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      T m = x[base];
      for (std::size_t k = 1; k < l.len; ++k) m = std::max(m, x[base + k * l.inner]);
      T z = 0;
      for (std::size_t k = 0; k < l.len; ++k) {
        const T e = std::exp(x[base + k * l.inner] - m);
        y[base + k * l.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < l.len; ++k) y[base + k * l.inner] /= z;
    }
  }
  return y;
}

template <typename T>
Var<T> softmax(Tape<T>& tape, const Var<T>& x, std::size_t axis) {
  auto y = softmax(x.value(), axis);
  require_finite(y, "softmax");
  auto yv = std::make_shared<Tensor<T>>(y);
  return tape.record(std::move(y), {x}, [=] {
    return [=](const Tensor<T>& dy) {
      auto* dx = x.grad_buffer();
      const auto l = detail::axis_layout(x.shape(), axis);
      for (std::size_t o = 0; o < l.outer; ++o) {
        for (std::size_t in = 0; in < l.inner; ++in) {
          const std::size_t base = o * l.len * l.inner + in;
          T dot = 0;
          for (std::size_t k = 0; k < l.len; ++k) {
            dot += dy[base + k * l.inner] * (*yv)[base + k * l.inner];
          }
          for (std::size_t k = 0; k < l.len; ++k) {
            const std::size_t j = base + k * l.inner;
            (*dx)[j] += (*yv)[j] * (dy[j] - dot);
          }
        }
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Layout ops on H x W x C maps

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_shape(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) &&
                    a.dim(1) == b.dim(1),
                "concat_channels: spatial mismatch " + to_string(a.shape()) +
                    " vs " + to_string(b.shape()));
  const std::size_t ca = a.dim(2), cb = b.dim(2), n = a.dim(0) * a.dim(1);
  Tensor<T> y(Shape{a.dim(0), a.dim(1), ca + cb});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.raw() + i * ca, ca, y.raw() + i * (ca + cb));
    std::copy_n(b.raw() + i * cb, cb, y.raw() + i * (ca + cb) + ca);
  }
  return y;
}

template <typename T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  auto y = concat_channels(a.value(), b.value());
  return tape.record(std::move(y), {a, b}, [=] {
    return [=](const Tensor<T>& dy) {
      const std::size_t ca = a.shape()[2], cb = b.shape()[2];
      const std::size_t n = a.shape()[0] * a.shape()[1];
      if (auto* da = a.grad_buffer()) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < ca; ++k) (*da)[i * ca + k] += dy[i * (ca + cb) + k];
      }
      if (auto* db = b.grad_buffer()) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < cb; ++k) (*db)[i * cb + k] += dy[i * (ca + cb) + ca + k];
      }
    };
  });
}

/// Mirrors an H x W x C map left to right.
template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& x) {
  require_shape(x.rank() == 3, "flip_horizontal: input must be H x W x C");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t col = 0; col < w; ++col)
      std::copy_n(x.raw() + (r * w + col) * c, c, y.raw() + (r * w + (w - 1 - col)) * c);
  return y;
}

template <typename T>
Var<T> flip_horizontal(Tape<T>& tape, const Var<T>& x) {
  return tape.record(flip_horizontal(x.value()), {x}, [=] {
    return [=](const Tensor<T>& dy) { x.accumulate(flip_horizontal(dy)); };
  });
}

}  // namespace stereonet
