#pragma once

// Parameter-holding building blocks shared by the feature tower, the cost
// filter and the refiners.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "stereonet/autograd.hpp"
#include "stereonet/conv.hpp"
#include "stereonet/ops.hpp"

namespace stereonet {

/// Weight initializer: truncated normal (cut at 2 sigma) with
/// std = gain * sqrt(2 / fan_in).
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  template <typename T>
  Tensor<T> truncated_normal(Shape shape, std::size_t fan_in, double gain = 1.0) {
    Tensor<T> t(std::move(shape));
    const double stddev = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : t.data()) {
      double z;
      do {
        z = n(rng_);
      } while (std::abs(z) > 2.0);
      v = static_cast<T>(z * stddev);
    }
    return t;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

template <typename T>
struct ConvLayer {
  Param<T> weight;
  Param<T> bias;
  int stride = 1;
  int dilation = 1;

  /// 2D layer: k x k x cin x cout.
  static ConvLayer conv2d(const std::string& name, std::size_t k, std::size_t cin,
                          std::size_t cout, int stride, int dilation,
                          Initializer& init, double gain = 1.0) {
    ConvLayer l;
    l.weight = Param<T>(name + ".w", init.truncated_normal<T>({k, k, cin, cout},
                                                              k * k * cin, gain));
    l.bias = Param<T>(name + ".b", Tensor<T>(Shape{cout}));
    l.stride = stride;
    l.dilation = dilation;
    return l;
  }

  /// 3D layer: k x k x k x cin x cout.
  static ConvLayer conv3d(const std::string& name, std::size_t k, std::size_t cin,
                          std::size_t cout, Initializer& init) {
    ConvLayer l;
    l.weight = Param<T>(name + ".w", init.truncated_normal<T>({k, k, k, cin, cout},
                                                              k * k * k * cin));
    l.bias = Param<T>(name + ".b", Tensor<T>(Shape{cout}));
    return l;
  }

  bool is_3d() const { return weight.value.rank() == 5; }

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) {
    auto w = tape.param(weight);
    auto b = tape.param(bias);
    return is_3d() ? stereonet::conv3d(tape, x, w, b, stride)
                   : stereonet::conv2d(tape, x, w, b, stride, dilation);
  }

  template <typename F>
  void visit(F&& f) {
    f(weight);
    f(bias);
  }
};

template <typename T>
struct NormLayer {
  Param<T> gamma;
  Param<T> beta;

  static NormLayer make(const std::string& name, std::size_t channels) {
    return {Param<T>(name + ".gamma", Tensor<T>(Shape{channels}, T{1})),
            Param<T>(name + ".beta", Tensor<T>(Shape{channels}))};
  }

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) {
    return batch_norm(tape, x, tape.param(gamma), tape.param(beta));
  }

  template <typename F>
  void visit(F&& f) {
    f(gamma);
    f(beta);
  }
};

/// conv -> BN -> leaky ReLU, as used in the cost filter.
template <typename T>
struct ConvNormAct {
  ConvLayer<T> conv;
  NormLayer<T> norm;

  Var<T> operator()(Tape<T>& tape, const Var<T>& x, T alpha) {
    return leaky_relu(tape, norm(tape, conv(tape, x)), alpha);
  }

  template <typename F>
  void visit(F&& f) {
    conv.visit(f);
    norm.visit(f);
  }
};

/// y = x + BN(conv2(lrelu(BN(conv1(x))))). With both convs (and the BN
/// shifts) at zero the block is exactly the identity.
template <typename T>
struct ResBlock {
  ConvLayer<T> conv1;
  NormLayer<T> norm1;
  ConvLayer<T> conv2;
  NormLayer<T> norm2;

  static ResBlock make(const std::string& name, std::size_t channels, int dilation,
                       Initializer& init) {
    ResBlock b;
    b.conv1 = ConvLayer<T>::conv2d(name + ".conv1", 3, channels, channels, 1, dilation, init);
    b.norm1 = NormLayer<T>::make(name + ".bn1", channels);
    b.conv2 = ConvLayer<T>::conv2d(name + ".conv2", 3, channels, channels, 1, dilation, init);
    b.norm2 = NormLayer<T>::make(name + ".bn2", channels);
    return b;
  }

  Var<T> operator()(Tape<T>& tape, const Var<T>& x, T alpha) {
    auto h = leaky_relu(tape, norm1(tape, conv1(tape, x)), alpha);
    h = norm2(tape, conv2(tape, h));
    return add(tape, x, h);
  }

  template <typename F>
  void visit(F&& f) {
    conv1.visit(f);
    norm1.visit(f);
    conv2.visit(f);
    norm2.visit(f);
  }
};

/// Visits every Param of `obj` (anything with a visit(F) member).
template <typename T, typename Obj>
std::vector<Param<T>*> collect_params(Obj& obj) {
  std::vector<Param<T>*> out;
  obj.visit([&](Param<T>& p) { out.push_back(&p); });
  return out;
}

template <typename T, typename Obj>
std::size_t count_parameters(Obj& obj) {
  std::size_t n = 0;
  obj.visit([&](Param<T>& p) { n += p.value.size(); });
  return n;
}

template <typename T, typename Obj>
void zero_grads(Obj& obj) {
  obj.visit([](Param<T>& p) { p.zero_grad(); });
}

}  // namespace stereonet
