#pragma once

#include <random>

#include "stereonet/stereonet.hpp"

namespace sn_test {

using namespace stereonet;

template <typename T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

/// sum(y * w) for a fixed random w, so every output coordinate carries a
/// distinct weight in the gradient check.
template <typename T>
Var<T> weighted_sum(Tape<T>& tape, const Var<T>& y, std::uint64_t seed = 99) {
  auto w = tape.constant(random_tensor<T>(y.shape(), seed));
  return sum(tape, mul(tape, y, w));
}

}  // namespace sn_test
