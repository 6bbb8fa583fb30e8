#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "stereonet/io/sample.hpp"
#include "stereonet/model.hpp"

namespace stereonet {

namespace detail {

inline void check_metric_inputs(const Tensor<float>& pred, const Tensor<float>& gt,
                                const Mask& mask, const char* what) {
  require_shape(pred.size() == gt.size() && pred.dim(0) == gt.dim(0) && pred.dim(1) == gt.dim(1),
                std::string(what) + ": prediction " + to_string(pred.shape()) +
                    " does not match ground truth " + to_string(gt.shape()));
  require_shape(mask.size() == gt.size(), std::string(what) + ": mask size mismatch");
  if (mask_count(mask) == 0) throw Error(std::string(what) + ": empty mask");
}

}  // namespace detail

/// Mean |pred - gt| over the mask.
inline double epe(const Tensor<float>& pred, const Tensor<float>& gt, const Mask& mask) {
  detail::check_metric_inputs(pred, gt, mask, "epe");
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    s += std::abs(double(pred[i]) - double(gt[i]));
    ++n;
  }
  return s / double(n);
}

/// Percentage of masked pixels with |pred - gt| > threshold.
inline double bad_pixel_ratio(const Tensor<float>& pred, const Tensor<float>& gt,
                              const Mask& mask, double threshold) {
  if (!(threshold > 0)) throw Error("bad_pixel_ratio: threshold must be positive");
  detail::check_metric_inputs(pred, gt, mask, "bad_pixel_ratio");
  std::size_t bad = 0, n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    bad += std::abs(double(pred[i]) - double(gt[i])) > threshold;
    ++n;
  }
  return 100.0 * double(bad) / double(n);
}

/// Mean |pred - gt| over masked pixels whose rounded prediction equals the
/// rounded ground truth (round half away from zero). Empty when no pixel
/// qualifies.
inline std::optional<double> subpixel_precision(const Tensor<float>& pred,
                                                const Tensor<float>& gt, const Mask& mask) {
  detail::check_metric_inputs(pred, gt, mask, "subpixel_precision");
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i] || std::round(double(pred[i])) != std::round(double(gt[i]))) continue;
    s += std::abs(double(pred[i]) - double(gt[i]));
    ++n;
  }
  if (n == 0) return std::nullopt;
  return s / double(n);
}

/// Depth error of a disparity error: delta * Z^2 / (baseline * focal).
inline double depth_error_bound(double delta_px, double depth_m, double baseline_m,
                                double focal_px) {
  if (!(delta_px > 0 && depth_m > 0 && baseline_m > 0 && focal_px > 0)) {
    throw Error("depth_error_bound: all inputs must be positive");
  }
  return delta_px * depth_m * depth_m / (baseline_m * focal_px);
}

struct EvalReport {
  double epe_all = 0;
  double epe_nocc = 0;
  std::map<double, double> bad_ratio;  // threshold px -> percent
  std::optional<double> subpixel_precision;
  std::size_t n_pixels = 0;
};

inline EvalReport evaluate(const Tensor<float>& pred, const Tensor<float>& gt, const Mask& mask,
                           const Mask* nocc = nullptr,
                           const std::vector<double>& thresholds = {1.0, 2.0, 3.0}) {
  EvalReport r;
  r.epe_all = epe(pred, gt, mask);
  r.epe_nocc = nocc ? epe(pred, gt, *nocc) : r.epe_all;
  for (double t : thresholds) r.bad_ratio[t] = bad_pixel_ratio(pred, gt, mask, t);
  r.subpixel_precision = subpixel_precision(pred, gt, mask);
  r.n_pixels = mask_count(mask);
  return r;
}

/// Columns: epe_all,epe_nocc,bad_<t>px...,subpixel_precision,n_pixels.
/// An undefined subpixel precision is written as "nan".
inline void write_report_csv(std::ostream& os, const EvalReport& r) {
  os << "epe_all,epe_nocc";
  for (const auto& [t, v] : r.bad_ratio) os << ",bad_" << t << "px";
  os << ",subpixel_precision,n_pixels\n";
  os << r.epe_all << ',' << r.epe_nocc;
  for (const auto& [t, v] : r.bad_ratio) os << ',' << v;
  os << ',';
  if (r.subpixel_precision) {
    os << *r.subpixel_precision;
  } else {
    os << "nan";
  }
  os << ',' << r.n_pixels << '\n';
}

/// One row of a runtime breakdown.
struct StageRow {
  std::string stage;
  double ms;
  double percent;
};

/// Median of per-stage timings over `repetitions` forward passes after one
/// warm-up pass. Rows: feature, volume, filter, then refine_L<k> per level.
/// Percentages are relative to the median total, so they need not sum to
/// exactly 100.
template <typename T>
std::vector<StageRow> runtime_breakdown(StereoNet<T>& m, const Tensor<T>& left_norm,
                                        const Tensor<T>& right_norm, int repetitions,
                                        bool refine = true) {
  if (repetitions < 5) throw Error("runtime_breakdown: need at least 5 repetitions");
  StageTimings warm;
  (void)predict(m, left_norm, right_norm, refine, &warm);
  std::vector<StageTimings> runs(static_cast<std::size_t>(repetitions));
  for (auto& t : runs) (void)predict(m, left_norm, right_norm, refine, &t);

  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& t : runs) v.push_back(get(t));
    return median(v);
  };
  std::vector<StageRow> rows;
  rows.push_back({"feature", column([](const StageTimings& t) { return t.feature_ms; }), 0});
  rows.push_back({"volume", column([](const StageTimings& t) { return t.volume_ms; }), 0});
  rows.push_back({"filter", column([](const StageTimings& t) { return t.filter_ms; }), 0});
  for (std::size_t i = 0; i < runs.front().refine_ms.size(); ++i) {
    const int level = runs.front().refine_ms[i].first;
    rows.push_back({"refine_L" + std::to_string(level),
                    column([i](const StageTimings& t) { return t.refine_ms[i].second; }), 0});
  }
  const double total = column([](const StageTimings& t) { return t.total_ms; });
  for (auto& r : rows) r.percent = total > 0 ? 100.0 * r.ms / total : 0.0;
  rows.push_back({"total", total, 100.0});
  return rows;
}

/// Columns: stage,ms,percent.
inline void write_breakdown_csv(std::ostream& os, const std::vector<StageRow>& rows) {
  os << "stage,ms,percent\n";
  for (const auto& r : rows) os << r.stage << ',' << r.ms << ',' << r.percent << '\n';
}

}  // namespace stereonet
