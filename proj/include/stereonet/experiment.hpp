#pragma once

// Desk-scale subpixel experiment: synthetic train/test sets, per-pair
// subpixel precision of network variants against the classical matcher, and
// per-level error of the refinement hierarchy.

#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "stereonet/baseline.hpp"
#include "stereonet/eval.hpp"
#include "stereonet/io/synth.hpp"
#include "stereonet/model.hpp"

namespace stereonet {

struct SynthSetSpec {
  std::size_t count = 200;
  std::size_t width = 128;
  std::size_t height = 64;
  double max_disp = 20.0;
  double noise_sigma = 2.0;
  double blur_sigma = 1.0;
  double ramp_fraction = 0.5;
  std::uint64_t seed = 0;
};

/// Alternates constant and ramp scenes (ramp share set by ramp_fraction).
inline std::vector<StereoSample> make_synth_set(const SynthSetSpec& s) {
  std::mt19937_64 rng(s.seed);
  std::vector<StereoSample> out;
  out.reserve(s.count);
  for (std::size_t i = 0; i < s.count; ++i) {
    const bool ramp = double(i % 10) < s.ramp_fraction * 10.0;
    auto spec = random_synth_spec(rng, s.width, s.height, s.max_disp, ramp, s.noise_sigma);
    spec.blur_sigma = s.blur_sigma;
    out.push_back(synth_pair(spec));
  }
  return out;
}

/// Full-resolution network prediction for a raw [0, 255] sample.
inline Tensor<float> predict_sample(StereoNet<float>& m, const StereoSample& s, bool refine) {
  return predict(m, normalize(s.left), normalize(s.right), refine);
}

/// Per-level predictions, each upsampled (value-scaled) to full resolution,
/// ordered coarse to fine.
inline std::vector<Tensor<float>> predict_levels(StereoNet<float>& m, const StereoSample& s) {
  Tape<float> tape(false);
  auto r = forward(tape, m, tape.constant(normalize(s.left)), tape.constant(normalize(s.right)));
  std::vector<Tensor<float>> out;
  for (const auto& v : r.maps) {
    out.push_back(upsample_disparity(tape, v, s.height(), s.width()).value());
  }
  return out;
}

/// Evaluation mask for the subpixel experiment: valid ground truth, away
/// from the borders where neither method has a full window or disparity range.
inline Mask experiment_mask(const StereoSample& s, const MatchConfig& cfg) {
  Mask m = interior_mask(s.height(), s.width(), cfg);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = m[i] && s.valid_left[i];
  return m;
}

struct Fig4Row {
  std::string config;
  std::vector<std::optional<double>> per_pair;  // subpixel precision per test pair
  std::vector<double> epe;                      // EPE per test pair

  std::optional<double> mean_precision() const {
    double s = 0;
    std::size_t n = 0;
    for (const auto& v : per_pair)
      if (v) s += *v, ++n;
    if (n == 0) return std::nullopt;
    return s / double(n);
  }

  double mean_epe() const {
    double s = 0;
    for (double v : epe) s += v;
    return epe.empty() ? 0.0 : s / double(epe.size());
  }
};

struct Fig4Variant {
  std::string name;
  StereoNet<float>* model;
  bool refine;
};

/// One row per network variant plus a final "baseline" row.
inline std::vector<Fig4Row> fig4_experiment(const std::vector<Fig4Variant>& variants,
                                            const MatchConfig& baseline,
                                            const std::vector<StereoSample>& test) {
  std::vector<Fig4Row> rows;
  auto score = [&](Fig4Row& row, const Tensor<float>& pred, const StereoSample& s) {
    const Mask mask = experiment_mask(s, baseline);
    row.per_pair.push_back(subpixel_precision(pred, s.gt_left, mask));
    row.epe.push_back(epe(pred, s.gt_left, mask));
  };
  for (const auto& v : variants) {
    Fig4Row row{v.name, {}, {}};
    for (const auto& s : test) score(row, predict_sample(*v.model, s, v.refine), s);
    rows.push_back(std::move(row));
  }
  Fig4Row base{"baseline", {}, {}};
  for (const auto& s : test) score(base, classical_pipeline(s, baseline).values, s);
  rows.push_back(std::move(base));
  return rows;
}

/// Columns: config,subpixel_precision,epe,pairs_defined. Plot with
/// x = config, y = subpixel_precision.
inline void write_fig4_csv(std::ostream& os, const std::vector<Fig4Row>& rows) {
  os << "config,subpixel_precision,epe,pairs_defined\n";
  for (const auto& r : rows) {
    std::size_t defined = 0;
    for (const auto& v : r.per_pair) defined += v.has_value();
    os << r.config << ',';
    if (auto m = r.mean_precision()) {
      os << *m;
    } else {
      os << "nan";
    }
    os << ',' << r.mean_epe() << ',' << defined << '\n';
  }
}

/// Mean full-resolution EPE of each hierarchy level over a test set, coarse
/// (level K) first.
inline std::vector<double> level_epe(StereoNet<float>& m, const std::vector<StereoSample>& test,
                                     const MatchConfig& cfg) {
  std::vector<double> sum;
  for (const auto& s : test) {
    const auto maps = predict_levels(m, s);
    const Mask mask = experiment_mask(s, cfg);
    if (sum.empty()) sum.assign(maps.size(), 0.0);
    for (std::size_t i = 0; i < maps.size(); ++i) sum[i] += epe(maps[i], s.gt_left, mask);
  }
  for (auto& v : sum) v /= double(test.size());
  return sum;
}

}  // namespace stereonet
