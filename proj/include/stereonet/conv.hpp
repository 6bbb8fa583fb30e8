#pragma once

// 2D and 3D "same"-padded cross-correlation. Both are lowered to one
// three-axis kernel (a 2D input H x W x C is treated as H x W x 1 x C).
// Strided convolutions run im2col over blocks of output positions followed
// by a GEMM.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cstring>
#include <vector>

#include "stereonet/autograd.hpp"
#include "stereonet/tensor.hpp"

namespace stereonet {

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
  std::array<std::size_t, 3> in{1, 1, 1};
  std::array<std::size_t, 3> out{1, 1, 1};
  std::array<std::size_t, 3> k{1, 1, 1};
  std::array<long, 3> stride{1, 1, 1};
  std::array<long, 3> dil{1, 1, 1};
  std::array<long, 3> pad{0, 0, 0};
  std::size_t cin = 0;
  std::size_t cout = 0;

  std::size_t taps() const { return k[0] * k[1] * k[2]; }
  std::size_t kdim() const { return taps() * cin; }
  std::size_t positions() const { return out[0] * out[1] * out[2]; }
  std::size_t block_rows() const {
    constexpr std::size_t kBlockElems = std::size_t{1} << 19;
    return std::max<std::size_t>(16, kBlockElems / std::max<std::size_t>(kdim(), 1));
  }
};

inline ConvGeometry make_geometry(const std::array<std::size_t, 3>& in,
                                  std::size_t cin,
                                  const std::array<std::size_t, 3>& k,
                                  std::size_t cout,
                                  const std::array<long, 3>& stride,
                                  const std::array<long, 3>& dil) {
  ConvGeometry g;
  g.in = in;
  g.k = k;
  g.cin = cin;
  g.cout = cout;
  g.stride = stride;
  g.dil = dil;
  for (int a = 0; a < 3; ++a) {
    if (k[a] % 2 == 0) throw ShapeError("conv: kernel extents must be odd");
    if (stride[a] < 1) throw ShapeError("conv: stride must be >= 1");
    if (dil[a] < 1) throw ShapeError("conv: dilation must be >= 1");
    g.out[a] = (in[a] + stride[a] - 1) / stride[a];
    g.pad[a] = dil[a] * static_cast<long>(k[a] - 1) / 2;
  }
  return g;
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t p0, std::size_t rows,
            T* cols) {
  const std::size_t kdim = g.kdim();
  const std::size_t plane = g.out[1] * g.out[2];
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t p = p0 + r;
    const long o0 = static_cast<long>(p / plane);
    const long o1 = static_cast<long>((p / g.out[2]) % g.out[1]);
    const long o2 = static_cast<long>(p % g.out[2]);
    T* dst = cols + r * kdim;
    for (std::size_t t0 = 0; t0 < g.k[0]; ++t0) {
      const long i0 = o0 * g.stride[0] - g.pad[0] + static_cast<long>(t0) * g.dil[0];
      const bool ok0 = i0 >= 0 && i0 < static_cast<long>(g.in[0]);
      for (std::size_t t1 = 0; t1 < g.k[1]; ++t1) {
        const long i1 = o1 * g.stride[1] - g.pad[1] + static_cast<long>(t1) * g.dil[1];
        const bool ok1 = ok0 && i1 >= 0 && i1 < static_cast<long>(g.in[1]);
        for (std::size_t t2 = 0; t2 < g.k[2]; ++t2) {
          const long i2 = o2 * g.stride[2] - g.pad[2] + static_cast<long>(t2) * g.dil[2];
          if (ok1 && i2 >= 0 && i2 < static_cast<long>(g.in[2])) {
            const std::size_t src =
                ((static_cast<std::size_t>(i0) * g.in[1] + static_cast<std::size_t>(i1)) *
                     g.in[2] +
                 static_cast<std::size_t>(i2)) *
                g.cin;
            std::memcpy(dst, x + src, g.cin * sizeof(T));
          } else {
            std::memset(dst, 0, g.cin * sizeof(T));
          }
          dst += g.cin;
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, const ConvGeometry& g, std::size_t p0,
            std::size_t rows, T* dx) {
  const std::size_t kdim = g.kdim();
  const std::size_t plane = g.out[1] * g.out[2];
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t p = p0 + r;
    const long o0 = static_cast<long>(p / plane);
    const long o1 = static_cast<long>((p / g.out[2]) % g.out[1]);
    const long o2 = static_cast<long>(p % g.out[2]);
    const T* src = cols + r * kdim;
    for (std::size_t t0 = 0; t0 < g.k[0]; ++t0) {
      const long i0 = o0 * g.stride[0] - g.pad[0] + static_cast<long>(t0) * g.dil[0];
      const bool ok0 = i0 >= 0 && i0 < static_cast<long>(g.in[0]);
      for (std::size_t t1 = 0; t1 < g.k[1]; ++t1) {
        const long i1 = o1 * g.stride[1] - g.pad[1] + static_cast<long>(t1) * g.dil[1];
        const bool ok1 = ok0 && i1 >= 0 && i1 < static_cast<long>(g.in[1]);
        for (std::size_t t2 = 0; t2 < g.k[2]; ++t2) {
          const long i2 = o2 * g.stride[2] - g.pad[2] + static_cast<long>(t2) * g.dil[2];
          if (ok1 && i2 >= 0 && i2 < static_cast<long>(g.in[2])) {
            T* dst = dx + ((static_cast<std::size_t>(i0) * g.in[1] +
                            static_cast<std::size_t>(i1)) *
                               g.in[2] +
                           static_cast<std::size_t>(i2)) *
                              g.cin;
            for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
          }
          src += g.cin;
        }
      }
    }
  }
}

// Stride-1 path. The input is copied into a zero-padded buffer; on the
// "wide" grid (axis 0 unpadded, axes 1 and 2 padded) each kernel tap then
// reads a contiguous slice at a constant flat offset, so the convolution is
// one GEMM per tap with no im2col. Wide positions outside the real output
// are discarded.
struct WideLayout {
  std::size_t p1 = 1, p2 = 1;  // padded extents of axes 1 and 2
  std::size_t rows = 0;        // wide grid positions: in0 * p1 * p2
  std::size_t padded = 0;      // padded buffer length in pixels
  std::vector<std::size_t> offsets;  // flat offset per tap
};

inline WideLayout wide_layout(const ConvGeometry& g) {
  WideLayout l;
  l.p1 = g.in[1] + 2 * static_cast<std::size_t>(g.pad[1]);
  l.p2 = g.in[2] + 2 * static_cast<std::size_t>(g.pad[2]);
  const std::size_t p0 = g.in[0] + 2 * static_cast<std::size_t>(g.pad[0]);
  l.rows = g.in[0] * l.p1 * l.p2;
  l.padded = p0 * l.p1 * l.p2 + 2 * static_cast<std::size_t>(g.pad[1]) * l.p2 +
             2 * static_cast<std::size_t>(g.pad[2]);
  for (std::size_t t0 = 0; t0 < g.k[0]; ++t0)
    for (std::size_t t1 = 0; t1 < g.k[1]; ++t1)
      for (std::size_t t2 = 0; t2 < g.k[2]; ++t2)
        l.offsets.push_back((t0 * g.dil[0] * l.p1 + t1 * g.dil[1]) * l.p2 + t2 * g.dil[2]);
  return l;
}

inline bool use_wide_path(const ConvGeometry& g) {
  return g.stride[0] == 1 && g.stride[1] == 1 && g.stride[2] == 1;
}

template <typename T, typename Fn>
void for_each_pixel(const ConvGeometry& g, const WideLayout& l, Fn&& fn) {
  for (std::size_t i0 = 0; i0 < g.in[0]; ++i0)
    for (std::size_t i1 = 0; i1 < g.in[1]; ++i1)
      for (std::size_t i2 = 0; i2 < g.in[2]; ++i2) {
        const std::size_t real = (i0 * g.in[1] + i1) * g.in[2] + i2;
        const std::size_t wide = (i0 * l.p1 + i1) * l.p2 + i2;
        fn(real, wide);
      }
}

template <typename T>
std::vector<T> pad_input(const T* x, const ConvGeometry& g, const WideLayout& l) {
  std::vector<T> xp(l.padded * g.cin, T{0});
  const std::size_t shift = (static_cast<std::size_t>(g.pad[0]) * l.p1 +
                             static_cast<std::size_t>(g.pad[1])) * l.p2 +
                            static_cast<std::size_t>(g.pad[2]);
  for_each_pixel<T>(g, l, [&](std::size_t real, std::size_t wide) {
    std::memcpy(xp.data() + (wide + shift) * g.cin, x + real * g.cin, g.cin * sizeof(T));
  });
  return xp;
}

constexpr std::size_t kWideBlock = 4096;

template <typename T>
Tensor<T> conv_forward_wide(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                            const ConvGeometry& g, const Shape& out_shape) {
  const auto l = wide_layout(g);
  const auto xp = pad_input(x.raw(), g, l);
  RowMatrix<T> yw(l.rows, g.cout);
  for (std::size_t q0 = 0; q0 < l.rows; q0 += kWideBlock) {
    const std::size_t n = std::min(kWideBlock, l.rows - q0);
    auto yb = yw.middleRows(q0, n);
    yb.setZero();
    for (std::size_t t = 0; t < l.offsets.size(); ++t) {
      Eigen::Map<const RowMatrix<T>> xs(xp.data() + (q0 + l.offsets[t]) * g.cin, n, g.cin);
      Eigen::Map<const RowMatrix<T>> wt(w.raw() + t * g.cin * g.cout, g.cin, g.cout);
      yb.noalias() += xs * wt;
    }
  }
  Tensor<T> y(out_shape);
  for_each_pixel<T>(g, l, [&](std::size_t real, std::size_t wide) {
    T* dst = y.raw() + real * g.cout;
    const T* src = yw.data() + wide * g.cout;
    for (std::size_t c = 0; c < g.cout; ++c) dst[c] = src[c] + b[c];
  });
  return y;
}

template <typename T>
void conv_backward_wide(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                        const ConvGeometry& g, Tensor<T>* dx, Tensor<T>* dw,
                        Tensor<T>* db) {
  const auto l = wide_layout(g);
  RowMatrix<T> dyw = RowMatrix<T>::Zero(l.rows, g.cout);
  for_each_pixel<T>(g, l, [&](std::size_t real, std::size_t wide) {
    std::memcpy(dyw.data() + wide * g.cout, dy.raw() + real * g.cout, g.cout * sizeof(T));
  });
  if (db) {
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dbm(db->raw(), g.cout);
    dbm += dyw.colwise().sum();
  }
  std::vector<T> xp;
  if (dw) xp = pad_input(x.raw(), g, l);
  std::vector<T> dxp;
  if (dx) dxp.assign(l.padded * g.cin, T{0});
  for (std::size_t q0 = 0; q0 < l.rows; q0 += kWideBlock) {
    const std::size_t n = std::min(kWideBlock, l.rows - q0);
    auto dyb = dyw.middleRows(q0, n);
    for (std::size_t t = 0; t < l.offsets.size(); ++t) {
      const std::size_t off = (q0 + l.offsets[t]) * g.cin;
      if (dw) {
        Eigen::Map<const RowMatrix<T>> xs(xp.data() + off, n, g.cin);
        Eigen::Map<RowMatrix<T>> dwt(dw->raw() + t * g.cin * g.cout, g.cin, g.cout);
        dwt.noalias() += xs.transpose() * dyb;
      }
      if (dx) {
        Eigen::Map<const RowMatrix<T>> wt(w.raw() + t * g.cin * g.cout, g.cin, g.cout);
        Eigen::Map<RowMatrix<T>> dxs(dxp.data() + off, n, g.cin);
        dxs.noalias() += dyb * wt.transpose();
      }
    }
  }
  if (dx) {
    const std::size_t shift = (static_cast<std::size_t>(g.pad[0]) * l.p1 +
                               static_cast<std::size_t>(g.pad[1])) * l.p2 +
                              static_cast<std::size_t>(g.pad[2]);
    for_each_pixel<T>(g, l, [&](std::size_t real, std::size_t wide) {
      T* dst = dx->raw() + real * g.cin;
      const T* src = dxp.data() + (wide + shift) * g.cin;
      for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
    });
  }
}

template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& b, const ConvGeometry& g,
                       const Shape& out_shape) {
  if (use_wide_path(g)) return conv_forward_wide(x, w, b, g, out_shape);
  Tensor<T> y(out_shape);
  const std::size_t kdim = g.kdim();
  const std::size_t total = g.positions();
  const std::size_t block = std::min(g.block_rows(), total);
  std::vector<T> cols(block * kdim);
  Eigen::Map<const RowMatrix<T>> wm(w.raw(), kdim, g.cout);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(b.raw(), g.cout);
  for (std::size_t p0 = 0; p0 < total; p0 += block) {
    const std::size_t rows = std::min(block, total - p0);
    im2col(x.raw(), g, p0, rows, cols.data());
    Eigen::Map<const RowMatrix<T>> cm(cols.data(), rows, kdim);
    Eigen::Map<RowMatrix<T>> ym(y.raw() + p0 * g.cout, rows, g.cout);
    ym.noalias() = cm * wm;
    ym.rowwise() += bias;
  }
  return y;
}

/// Accumulates input, weight and bias gradients; null targets are skipped.
template <typename T>
void conv_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                   const ConvGeometry& g, Tensor<T>* dx, Tensor<T>* dw,
                   Tensor<T>* db) {
  if (use_wide_path(g)) return conv_backward_wide(x, w, dy, g, dx, dw, db);
  const std::size_t kdim = g.kdim();
  const std::size_t total = g.positions();
  const std::size_t block = std::min(g.block_rows(), total);
  std::vector<T> cols(block * kdim);
  Eigen::Map<const RowMatrix<T>> wm(w.raw(), kdim, g.cout);
  for (std::size_t p0 = 0; p0 < total; p0 += block) {
    const std::size_t rows = std::min(block, total - p0);
    Eigen::Map<const RowMatrix<T>> dym(dy.raw() + p0 * g.cout, rows, g.cout);
    if (dw) {
      im2col(x.raw(), g, p0, rows, cols.data());
      Eigen::Map<const RowMatrix<T>> cm(cols.data(), rows, kdim);
      Eigen::Map<RowMatrix<T>> dwm(dw->raw(), kdim, g.cout);
      dwm.noalias() += cm.transpose() * dym;
    }
    if (db) {
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dbm(db->raw(), g.cout);
      dbm += dym.colwise().sum();
    }
    if (dx) {
      Eigen::Map<RowMatrix<T>> cm(cols.data(), rows, kdim);
      cm.noalias() = dym * wm.transpose();
      col2im(cols.data(), g, p0, rows, dx->raw());
    }
  }
}

struct ConvCall {
  ConvGeometry geometry;
  Shape out_shape;
};

template <typename T>
ConvCall conv2d_call(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                     int stride, int dilation) {
  require_shape(x.rank() == 3, "conv2d: input must be H x W x Cin, got " +
                                   to_string(x.shape()));
  require_shape(w.rank() == 4, "conv2d: weight must be kh x kw x Cin x Cout");
  require_shape(w.dim(2) == x.dim(2),
                "conv2d: channel mismatch, input has " +
                    std::to_string(x.dim(2)) + " channels, weight expects " +
                    std::to_string(w.dim(2)));
  require_shape(b.size() == w.dim(3), "conv2d: bias length must equal Cout");
  auto g = make_geometry({x.dim(0), x.dim(1), 1}, x.dim(2),
                         {w.dim(0), w.dim(1), 1}, w.dim(3),
                         {stride, stride, 1}, {dilation, dilation, 1});
  return {g, Shape{g.out[0], g.out[1], g.cout}};
}

template <typename T>
ConvCall conv3d_call(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                     int stride) {
  require_shape(x.rank() == 4, "conv3d: input must be H x W x D x Cin, got " +
                                   to_string(x.shape()));
  require_shape(w.rank() == 5, "conv3d: weight must be kh x kw x kd x Cin x Cout");
  require_shape(w.dim(3) == x.dim(3),
                "conv3d: channel mismatch, input has " +
                    std::to_string(x.dim(3)) + " channels, weight expects " +
                    std::to_string(w.dim(3)));
  require_shape(b.size() == w.dim(4), "conv3d: bias length must equal Cout");
  auto g = make_geometry({x.dim(0), x.dim(1), x.dim(2)}, x.dim(3),
                         {w.dim(0), w.dim(1), w.dim(2)}, w.dim(4),
                         {stride, stride, stride}, {1, 1, 1});
  return {g, Shape{g.out[0], g.out[1], g.out[2], g.cout}};
}

template <typename T>
Var<T> record_conv(Tape<T>& tape, const Var<T>& x, const Var<T>& w,
                   const Var<T>& b, const ConvCall& call, const char* name) {
  auto y = conv_forward(x.value(), w.value(), b.value(), call.geometry,
                        call.out_shape);
  require_finite(y, name);
  const auto g = call.geometry;
  return tape.record(std::move(y), {x, w, b}, [=] {
    return [=](const Tensor<T>& dy) {
      conv_backward(x.value(), w.value(), dy, g, x.grad_buffer(),
                    w.grad_buffer(), b.grad_buffer());
    };
  });
}

}  // namespace detail

/// 2D convolution, input H x W x Cin, weight kh x kw x Cin x Cout.
/// Zero "same" padding of dilation*(k-1)/2; output extent ceil(n / stride).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 int stride = 1, int dilation = 1) {
  auto call = detail::conv2d_call(x, w, b, stride, dilation);
  auto y = detail::conv_forward(x, w, b, call.geometry, call.out_shape);
  require_finite(y, "conv2d");
  return y;
}

template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& w, const Var<T>& b,
              int stride = 1, int dilation = 1) {
  auto call = detail::conv2d_call(x.value(), w.value(), b.value(), stride, dilation);
  return detail::record_conv(tape, x, w, b, call, "conv2d");
}

/// 3D convolution over H x W x D x Cin with a kh x kw x kd x Cin x Cout kernel.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 int stride = 1) {
  auto call = detail::conv3d_call(x, w, b, stride);
  auto y = detail::conv_forward(x, w, b, call.geometry, call.out_shape);
  require_finite(y, "conv3d");
  return y;
}

template <typename T>
Var<T> conv3d(Tape<T>& tape, const Var<T>& x, const Var<T>& w, const Var<T>& b,
              int stride = 1) {
  auto call = detail::conv3d_call(x.value(), w.value(), b.value(), stride);
  return detail::record_conv(tape, x, w, b, call, "conv3d");
}

}  // namespace stereonet
