#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

#include "stereonet/io/sample.hpp"
#include "stereonet/loss.hpp"
#include "stereonet/model.hpp"
#include "stereonet/optim.hpp"

namespace stereonet {

struct TrainConfig {
  double lr0 = 1e-3;
  double decay_rate = 0.9;
  long decay_steps = 0;  // 0: iterations / 10
  long iterations = 1000;
  std::uint64_t seed = 0;
  bool both_sides = true;
  RobustLoss loss{};

  Schedule schedule() const {
    const long steps = decay_steps > 0 ? decay_steps : std::max(1L, iterations / 10);
    return {lr0, decay_rate, static_cast<double>(steps)};
  }

  void validate() const {
    if (!(lr0 > 0)) throw Error("lr0 must be positive");
    if (iterations < 1) throw Error("iterations must be >= 1");
    if (!(decay_rate > 0 && decay_rate <= 1)) throw Error("decay_rate must be in (0, 1]");
    if (!(loss.c > 0)) throw Error("loss c must be positive");
  }
};

struct StepRecord {
  long step;
  double lr;
  double loss;         // mean over the passes of this step
  double epe_fullres;  // left-view pass, final map
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  long passes = 0;  // forward/backward passes performed
};

/// Columns: step,lr,loss,epe_fullres.
inline void write_history_csv(std::ostream& os, const std::vector<StepRecord>& steps,
                              bool header = true) {
  if (header) os << "step,lr,loss,epe_fullres\n";
  for (const auto& r : steps) os << r.step << ',' << r.lr << ',' << r.loss << ',' << r.epe_fullres << '\n';
}

/// Model, optimizer accumulators and step counter: everything needed to
/// resume training.
template <typename T>
struct TrainState {
  StereoNet<T> model;
  OptState<T> opt;
  long step = 0;
};

namespace detail {

template <typename T>
struct PreparedSample {
  Tensor<T> left, right;  // normalized
  Tensor<T> gt_left;
  Mask valid_left;
  std::optional<Tensor<T>> gt_right;
  std::optional<Mask> valid_right;
};

template <typename T>
PreparedSample<T> prepare(const StereoSample& s) {
  PreparedSample<T> p{normalize(s.left.cast<T>()), normalize(s.right.cast<T>()),
                      s.gt_left.cast<T>(), s.valid_left, std::nullopt, std::nullopt};
  if (s.gt_right && s.valid_right) {
    p.gt_right = s.gt_right->cast<T>();
    p.valid_right = *s.valid_right;
  }
  return p;
}

}  // namespace detail

/// Result of one forward/backward pass.
struct PassResult {
  double loss;
  double epe_fullres;
};

/// Forward + backward on one view. When `mirrored`, the pair is flipped and
/// swapped so the network predicts the right view's disparity with the same
/// weights, and the prediction is flipped back before the loss.
template <typename T>
PassResult train_pass(StereoNet<T>& m, const Tensor<T>& left, const Tensor<T>& right,
                      const Tensor<T>& gt, const Mask& mask, const RobustLoss& rho,
                      bool mirrored) {
  Tape<T> tape;
  Var<T> l = tape.constant(mirrored ? flip_horizontal(right) : left);
  Var<T> r = tape.constant(mirrored ? flip_horizontal(left) : right);
  auto out = forward(tape, m, l, r);
  std::vector<Var<T>> maps = out.maps;
  if (mirrored) {
    for (auto& v : maps) v = flip_horizontal(tape, v);
  }
  auto loss = hierarchical_loss(tape, maps, gt, mask, rho);
  tape.backward(loss);

  Tape<T> eval(false);
  auto full = upsample_disparity(eval, eval.constant(maps.back().value()), gt.dim(0), gt.dim(1));
  double err = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    err += std::abs(double(full.value()[i]) - double(gt[i]));
    ++n;
  }
  return {double(loss.value()[0]), err / double(n)};
}

using StepCallback = std::function<void(const StepRecord&)>;

/// Runs optimizer steps state.step .. cfg.iterations - 1, batch size 1.
/// The sample order is a fresh seeded permutation per epoch, so a resumed
/// run visits the same samples as an uninterrupted one.
template <typename T>
TrainHistory train(TrainState<T>& state, const std::vector<StereoSample>& dataset,
                   const TrainConfig& cfg, const StepCallback& on_step = {}) {
  cfg.validate();
  if (dataset.empty()) throw Error("train: empty dataset");
  std::vector<detail::PreparedSample<T>> data;
  data.reserve(dataset.size());
  for (const auto& s : dataset) data.push_back(detail::prepare<T>(s));

  auto params = collect_params<T>(state.model);
  if (state.opt.accumulators.size() != params.size()) state.opt.init(params);
  const Schedule sched = cfg.schedule();
  const std::size_t n = data.size();

  TrainHistory hist;
  std::vector<std::size_t> order(n);
  long epoch = -1;
  for (long step = state.step; step < cfg.iterations; ++step) {
    if (step / long(n) != epoch) {
      epoch = step / long(n);
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * std::uint64_t(epoch + 1)));
      std::shuffle(order.begin(), order.end(), rng);
    }
    const auto& s = data[order[std::size_t(step) % n]];
    for (auto* p : params) p->zero_grad();

    auto a = train_pass(state.model, s.left, s.right, s.gt_left, s.valid_left, cfg.loss, false);
    ++hist.passes;
    double loss = a.loss;
    int passes = 1;
    if (cfg.both_sides && s.gt_right && mask_count(*s.valid_right) > 0) {
      auto b = train_pass(state.model, s.left, s.right, *s.gt_right, *s.valid_right, cfg.loss,
                          true);
      ++hist.passes;
      loss += b.loss;
      ++passes;
    }
    const double lr = lr_schedule(step, sched);
    rmsprop_step(params, state.opt, lr);
    state.step = step + 1;
    StepRecord rec{step, lr, loss / passes, a.epe_fullres};
    hist.steps.push_back(rec);
    if (on_step) on_step(rec);
  }
  return hist;
}

}  // namespace stereonet
