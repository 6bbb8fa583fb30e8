#pragma once

// Central finite-difference oracle for reverse-mode gradients.
//
// Relative error per coordinate is |a - n| / max(|a|, |n|, floor) where
// floor = floor_fraction * max_i |n_i|. The floor keeps coordinates whose
// true gradient is near zero from dominating through cancellation noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "stereonet/autograd.hpp"

namespace stereonet {

struct GradCheckOptions {
  double floor_fraction = 1e-3;
  std::size_t max_coords = 0;  // 0 = check every coordinate
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

inline std::vector<std::size_t> pick_coords(std::size_t n, const GradCheckOptions& opt) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (opt.max_coords != 0 && opt.max_coords < n) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(opt.max_coords);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

inline GradCheckResult compare_gradients(const std::vector<double>& analytic,
                                         const std::vector<double>& numeric,
                                         double floor_fraction) {
  GradCheckResult r;
  double scale = 0.0;
  for (double n : numeric) scale = std::max(scale, std::abs(n));
  const double floor = std::max(floor_fraction * scale, 1e-300);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double err = std::abs(a - n);
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    r.max_abs_error = std::max(r.max_abs_error, err);
    r.max_rel_error = std::max(r.max_rel_error, err / denom);
  }
  r.checked = analytic.size();
  return r;
}

/// Central differences of a scalar function of `values` at coordinates
/// `coords`. `eval` must read `values` afresh on every call.
template <typename T, typename Eval>
std::vector<double> numeric_gradient(Eval&& eval, std::span<T> values,
                                     const std::vector<std::size_t>& coords,
                                     double h) {
  std::vector<double> out;
  out.reserve(coords.size());
  for (std::size_t i : coords) {
    const T saved = values[i];
    values[i] = static_cast<T>(saved + h);
    const double fp = eval();
    values[i] = static_cast<T>(saved - h);
    const double fm = eval();
    values[i] = saved;
    out.push_back((fp - fm) / (2.0 * h));
  }
  return out;
}

/// Checks backward() of `fn` (Tape&, Var) -> scalar Var at `point`.
template <typename T, typename Fn>
GradCheckResult finite_diff_check(Fn&& fn, const Tensor<T>& point, double h = 1e-4,
                                  const GradCheckOptions& opt = {}) {
  Tape<T> tape;
  auto x = tape.input(point);
  auto loss = fn(tape, x);
  tape.backward(loss);
  const auto g = x.grad();

  Tensor<T> probe = point;
  auto eval = [&] {
    Tape<T> t(false);
    auto v = t.constant(probe);
    return static_cast<double>(fn(t, v).value()[0]);
  };
  const auto coords = pick_coords(point.size(), opt);
  auto numeric = numeric_gradient(eval, probe.data(), coords, h);
  std::vector<double> analytic;
  analytic.reserve(coords.size());
  for (std::size_t i : coords) analytic.push_back(static_cast<double>(g[i]));
  return compare_gradients(analytic, numeric, opt.floor_fraction);
}

}  // namespace stereonet
