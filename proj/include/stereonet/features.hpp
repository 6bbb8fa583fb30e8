#pragma once

// Siamese feature tower. K stride-2 5x5 convolutions feed the residual
// blocks, which end in a linear 3x3 convolution. Both views share weights.

#include <string>
#include <vector>

#include "stereonet/layers.hpp"

namespace stereonet {

struct TowerSpec {
  int K = 3;
  std::size_t in_channels = 3;
  std::size_t channels = 32;
  int num_res_blocks = 6;
  double leaky_alpha = 0.2;

  /// K in {3, 4} is what the architecture was designed for; other values
  /// run but are flagged here.
  bool is_standard() const { return K == 3 || K == 4; }
};

template <typename T>
struct TowerParams {
  TowerSpec spec;
  std::vector<ConvLayer<T>> downsample;
  std::vector<ResBlock<T>> blocks;
  ConvLayer<T> final;

  template <typename F>
  void visit(F&& f) {
    for (auto& l : downsample) l.visit(f);
    for (auto& b : blocks) b.visit(f);
    final.visit(f);
  }
};

template <typename T>
TowerParams<T> build_tower(const TowerSpec& spec, Initializer& init) {
  if (spec.K < 1) throw Error("tower: K must be >= 1");
  if (spec.channels < 1) throw Error("tower: channels must be >= 1");
  TowerParams<T> p;
  p.spec = spec;
  for (int i = 0; i < spec.K; ++i) {
    const std::size_t cin = i == 0 ? spec.in_channels : spec.channels;
    p.downsample.push_back(ConvLayer<T>::conv2d("tower.down" + std::to_string(i), 5, cin,
                                                spec.channels, 2, 1, init));
  }
  for (int i = 0; i < spec.num_res_blocks; ++i) {
    p.blocks.push_back(ResBlock<T>::make("tower.res" + std::to_string(i), spec.channels, 1, init));
  }
  p.final = ConvLayer<T>::conv2d("tower.final", 3, spec.channels, spec.channels, 1, 1, init);
  return p;
}

template <typename T>
TowerParams<T> build_tower(const TowerSpec& spec, std::uint64_t seed) {
  Initializer init(seed);
  return build_tower<T>(spec, init);
}

/// Maps a normalized H x W x Cin image to ceil(H/2^K) x ceil(W/2^K) x C.
template <typename T>
Var<T> extract_features(Tape<T>& tape, const Var<T>& image, TowerParams<T>& p) {
  require_shape(image.shape().size() == 3 && image.shape()[2] == p.spec.in_channels,
                "extract_features: expected H x W x " + std::to_string(p.spec.in_channels) +
                    " image, got " + to_string(image.shape()));
  const T alpha = static_cast<T>(p.spec.leaky_alpha);
  Var<T> x = image;
  for (auto& l : p.downsample) x = l(tape, x);
  for (auto& b : p.blocks) x = b(tape, x, alpha);
  return p.final(tape, x);
}

template <typename T>
Tensor<T> extract_features(const Tensor<T>& image, TowerParams<T>& p) {
  Tape<T> tape(false);
  return extract_features(tape, tape.constant(image), p).value();
}

}  // namespace stereonet
