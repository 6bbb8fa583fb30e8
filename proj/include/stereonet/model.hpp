#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "stereonet/cost_volume.hpp"
#include "stereonet/features.hpp"
#include "stereonet/refinement.hpp"

namespace stereonet {

struct ModelConfig {
  int K = 3;
  int max_disparity = 191;  // D; (D + 1) must be divisible by 2^K
  std::size_t channels = 32;
  RefinementMode mode = RefinementMode::kMulti;
  double leaky_alpha = 0.2;
  double residual_gain = 1e-3;

  std::size_t candidates() const { return coarse_candidates(max_disparity, K); }

  HierarchyShape hierarchy() const { return {K, candidates(), mode}; }

  void validate() const {
    if (K < 1 || K > 8) throw Error("K must be in [1, 8]");
    if (channels < 1) throw Error("channels must be >= 1");
    (void)candidates();
  }
};

/// Wall time per pipeline stage of one forward pass, in milliseconds.
struct StageTimings {
  double feature_ms = 0;
  double volume_ms = 0;
  double filter_ms = 0;
  std::vector<std::pair<int, double>> refine_ms;  // (level, ms), coarse to fine
  double total_ms = 0;

  double stage_sum() const {
    double s = feature_ms + volume_ms + filter_ms;
    for (const auto& [lvl, ms] : refine_ms) s += ms;
    return s;
  }
};

template <typename T>
struct StereoNet {
  ModelConfig config;
  TowerParams<T> tower;
  CostFilterParams<T> filter;
  std::vector<RefinerParams<T>> refiners;

  template <typename F>
  void visit(F&& f) {
    tower.visit(f);
    filter.visit(f);
    for (auto& r : refiners) r.visit(f);
  }

  /// Feature tower plus cost filter: everything that produces the coarse map.
  template <typename F>
  void visit_unrefined(F&& f) {
    tower.visit(f);
    filter.visit(f);
  }

  std::size_t parameter_count() { return count_parameters<T>(*this); }

  std::size_t unrefined_parameter_count() {
    std::size_t n = 0;
    visit_unrefined([&](Param<T>& p) { n += p.value.size(); });
    return n;
  }

  template <typename U>
  StereoNet<U> cast() const;
};

template <typename T>
StereoNet<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Initializer init(seed);
  StereoNet<T> m;
  m.config = cfg;
  TowerSpec spec;
  spec.K = cfg.K;
  spec.channels = cfg.channels;
  spec.leaky_alpha = cfg.leaky_alpha;
  m.tower = build_tower<T>(spec, init);
  m.filter = build_cost_filter<T>(cfg.channels, init, 4, cfg.leaky_alpha);
  const std::size_t n = cfg.hierarchy().refiner_count();
  for (std::size_t i = 0; i < n; ++i) {
    m.refiners.push_back(build_refiner<T>("refine" + std::to_string(i), cfg.channels, init,
                                          cfg.residual_gain));
    m.refiners.back().leaky_alpha = cfg.leaky_alpha;
  }
  return m;
}

template <typename T>
template <typename U>
StereoNet<U> StereoNet<T>::cast() const {
  auto self = const_cast<StereoNet<T>&>(*this);  // copy; visit is non-const
  StereoNet<U> out = build_model<U>(config, 0);
  std::vector<Param<T>*> src = collect_params<T>(self);
  std::vector<Param<U>*> dst = collect_params<U>(out);
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i]->value = src[i]->value.template cast<U>();
    dst[i]->grad = src[i]->grad.template cast<U>();
  }
  return out;
}

template <typename T>
struct ForwardResult {
  Var<T> filtered;            // H' x W' x D'
  std::vector<Var<T>> maps;   // coarse first, then each refined level
  std::vector<int> levels;    // resolution level of each map
};

struct ForwardOptions {
  bool refine = true;
  StageTimings* timings = nullptr;
};

/// Runs the network on normalized left/right images (H x W x 3 in [-1, 1]).
template <typename T>
ForwardResult<T> forward(Tape<T>& tape, StereoNet<T>& m, const Var<T>& left,
                         const Var<T>& right, const ForwardOptions& opt = {}) {
  require_shape(left.shape() == right.shape(),
                "forward: left/right size mismatch " + to_string(left.shape()) + " vs " +
                    to_string(right.shape()));
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  const auto t_start = clock::now();
  auto t = t_start;

  ForwardResult<T> out;
  auto fl = extract_features(tape, left, m.tower);
  auto fr = extract_features(tape, right, m.tower);
  if (opt.timings) opt.timings->feature_ms = ms_since(t);

  t = clock::now();
  auto raw = form_cost_volume(tape, fl, fr, m.config.candidates());
  if (opt.timings) opt.timings->volume_ms = ms_since(t);

  t = clock::now();
  out.filtered = filter_cost_volume(tape, raw, m.filter);
  auto coarse = soft_argmin(tape, out.filtered);
  if (opt.timings) opt.timings->filter_ms = ms_since(t);

  out.maps.push_back(coarse);
  out.levels.push_back(m.config.K);
  if (opt.refine) {
    t = clock::now();
    std::function<void(int)> on_level = [&](int level) {
      if (opt.timings) opt.timings->refine_ms.emplace_back(level, ms_since(t));
      out.levels.push_back(level);
      t = clock::now();
    };
    auto maps = hierarchical_refine(tape, coarse, left, m.refiners, m.config.hierarchy(),
                                    on_level);
    out.maps.assign(maps.begin(), maps.end());
  }
  if (opt.timings) opt.timings->total_ms = ms_since(t_start);
  return out;
}

/// Inference helper: full-resolution disparity (refined when the model has
/// refiners and `refine` is set, else the value-scaled coarse map).
template <typename T>
Tensor<T> predict(StereoNet<T>& m, const Tensor<T>& left_norm, const Tensor<T>& right_norm,
                  bool refine = true, StageTimings* timings = nullptr) {
  Tape<T> tape(false);
  auto r = forward(tape, m, tape.constant(left_norm), tape.constant(right_norm),
                   {refine, timings});
  auto last = r.maps.back();
  return upsample_disparity(tape, last, left_norm.dim(0), left_norm.dim(1)).value();
}

}  // namespace stereonet
