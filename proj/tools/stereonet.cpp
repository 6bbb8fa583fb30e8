// stereonet command-line tool: train, infer, eval, bench.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "stereonet/stereonet.hpp"

namespace sn = stereonet;

namespace {

/// STEREONET_THREADS: 0 or unset means automatic. The library runs its
/// kernels on the calling thread, so any positive value is accepted as-is.
int requested_threads() {
  const char* v = std::getenv("STEREONET_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0) throw sn::ConfigError("STEREONET_THREADS must be a non-negative integer");
  return static_cast<int>(n);
}

std::vector<sn::StereoSample> load_dataset(const sn::RunConfig& c) {
  if (c.dataset == "synth") {
    sn::SynthSetSpec s;
    s.count = c.synth_count;
    s.width = c.synth_width;
    s.height = c.synth_height;
    s.max_disp = c.synth_max_disp;
    s.noise_sigma = c.synth_noise;
    s.seed = c.train.seed;
    return sn::make_synth_set(s);
  }
  const auto files = c.dataset == "kitti" ? sn::list_kitti(c.data_path)
                                          : sn::list_sceneflow(c.data_path);
  std::vector<sn::StereoSample> out;
  for (const auto& f : files) out.push_back(sn::load_sample(f));
  return out;
}

int cmd_train(const std::string& config_path, bool resume) {
  const sn::RunConfig cfg = sn::load_config(config_path);
  const auto data = load_dataset(cfg);
  if (data.empty()) throw sn::Error("train: dataset is empty");

  sn::TrainState<float> state;
  bool resumed = false;
  if (resume && std::filesystem::exists(cfg.checkpoint)) {
    state = sn::load_checkpoint(cfg.checkpoint);
    const auto& m = state.model.config;
    if (m.K != cfg.model.K || m.max_disparity != cfg.model.max_disparity ||
        m.channels != cfg.model.channels || m.mode != cfg.model.mode) {
      throw sn::ConfigError("train: checkpoint " + cfg.checkpoint +
                            " was trained with a different K/D/channels/refinement_mode");
    }
    resumed = true;
  } else {
    state.model = sn::build_model<float>(cfg.model, cfg.model_seed);
  }

  std::ofstream csv(cfg.loss_csv, resumed ? std::ios::app : std::ios::trunc);
  if (!csv) throw sn::IoError("train: cannot write " + cfg.loss_csv);
  if (!resumed) csv << "step,lr,loss,epe_fullres\n";
  std::cerr << "training " << data.size() << " samples, steps " << state.step << ".."
            << cfg.train.iterations << '\n';
  sn::train(state, data, cfg.train, [&](const sn::StepRecord& r) {
    sn::write_history_csv(csv, {r}, false);
    if (cfg.checkpoint_every > 0 && (r.step + 1) % cfg.checkpoint_every == 0) {
      csv.flush();
      sn::save_checkpoint(cfg.checkpoint, state);
      std::cerr << "step " << r.step + 1 << " loss " << r.loss << " epe " << r.epe_fullres << '\n';
    }
  });
  sn::save_checkpoint(cfg.checkpoint, state);
  csv.flush();
  if (!csv) throw sn::IoError("train: write failed for " + cfg.loss_csv);
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& left_path,
              const std::string& right_path, const std::string& out, const std::string& viz,
              const std::string& config_path, bool no_refine) {
  auto state = sn::load_checkpoint(ckpt);
  const auto& mc = state.model.config;
  if (!config_path.empty()) {
    const auto cfg = sn::load_config(config_path);
    if (cfg.model.K != mc.K || cfg.model.max_disparity != mc.max_disparity ||
        cfg.model.mode != mc.mode) {
      throw sn::ConfigError("infer: checkpoint K=" + std::to_string(mc.K) + " D=" +
                            std::to_string(mc.max_disparity) + " does not match config K=" +
                            std::to_string(cfg.model.K) + " D=" +
                            std::to_string(cfg.model.max_disparity));
    }
  }
  const auto left = sn::read_image(left_path);
  const auto right = sn::read_image(right_path);
  if (left.shape() != right.shape()) {
    throw sn::ShapeError("infer: left " + sn::to_string(left.shape()) + " and right " +
                         sn::to_string(right.shape()) + " differ in size");
  }
  const auto d = sn::predict(state.model, sn::normalize(left), sn::normalize(right), !no_refine);
  sn::write_pfm(out, d);
  if (!viz.empty()) sn::write_disparity_png(viz, d, float(mc.max_disparity));
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& mask_path, const std::string& report) {
  const auto pred = sn::read_pfm(pred_path, 1).data;
  const auto gt = sn::read_pfm(gt_path, 1).data;
  if (pred.shape() != gt.shape()) {
    throw sn::ShapeError("eval: prediction " + sn::to_string(pred.shape()) +
                         " and ground truth " + sn::to_string(gt.shape()) + " differ in size");
  }
  sn::Mask mask = sn::finite_mask(gt);
  if (!mask_path.empty()) {
    const auto m = sn::read_pfm(mask_path, 1).data;
    if (m.shape() != gt.shape()) throw sn::ShapeError("eval: mask size differs from ground truth");
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && m[i] > 0.0f;
  }
  const auto r = sn::evaluate(pred, gt, mask);
  std::ofstream os(report);
  if (!os) throw sn::IoError("eval: cannot write " + report);
  sn::write_report_csv(os, r);
  if (!os) throw sn::IoError("eval: write failed for " + report);
  return 0;
}

int cmd_bench(const std::string& ckpt, const std::string& size, int reps,
              const std::string& out) {
  auto state = sn::load_checkpoint(ckpt);
  std::size_t w = 0, h = 0;
  if (const auto x = size.find('x'); x != std::string::npos) {
    w = std::stoul(size.substr(0, x));
    h = std::stoul(size.substr(x + 1));
  }
  if (w == 0 || h == 0) throw sn::ConfigError("bench: --size must be WxH");
  sn::SynthSpec spec;
  spec.width = w;
  spec.height = h;
  const auto s = sn::synth_pair(spec);
  const auto rows = sn::runtime_breakdown(state.model, sn::normalize(s.left),
                                          sn::normalize(s.right), reps);
  if (out.empty()) {
    sn::write_breakdown_csv(std::cout, rows);
  } else {
    std::ofstream os(out);
    if (!os) throw sn::IoError("bench: cannot write " + out);
    sn::write_breakdown_csv(os, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StereoNet: hierarchical stereo matching"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model from a config file");
  std::string config;
  bool resume = false;
  train->add_option("--config", config, "key = value configuration file")->required();
  train->add_flag("--resume", resume, "continue from the configured checkpoint if it exists");

  auto* infer = app.add_subcommand("infer", "predict a disparity map");
  std::string ckpt, left, right, out, viz, infer_config;
  bool no_refine = false;
  infer->add_option("--checkpoint", ckpt)->required();
  infer->add_option("--left", left)->required();
  infer->add_option("--right", right)->required();
  infer->add_option("--out", out, "output PFM")->required();
  infer->add_option("--viz", viz, "optional color-mapped PNG");
  infer->add_option("--config", infer_config, "optional config to check against the checkpoint");
  infer->add_flag("--no-refine", no_refine, "use the value-scaled coarse output");

  auto* eval = app.add_subcommand("eval", "score a prediction against ground truth");
  std::string pred, gt, mask, report;
  eval->add_option("--pred", pred)->required();
  eval->add_option("--gt", gt)->required();
  eval->add_option("--mask", mask, "PFM, > 0 marks valid pixels");
  eval->add_option("--report", report, "output CSV")->required();

  auto* bench = app.add_subcommand("bench", "per-stage runtime breakdown");
  std::string bench_ckpt, size = "128x64", bench_out;
  int reps = 10;
  bench->add_option("--checkpoint", bench_ckpt)->required();
  bench->add_option("--size", size, "WxH");
  bench->add_option("--reps", reps)->check(CLI::Range(5, 100000));
  bench->add_option("--out", bench_out, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    const int threads = requested_threads();
    if (threads > 1) std::cerr << "note: running single-threaded\n";
    if (*train) return cmd_train(config, resume);
    if (*infer) return cmd_infer(ckpt, left, right, out, viz, infer_config, no_refine);
    if (*eval) return cmd_eval(pred, gt, mask, report);
    if (*bench) return cmd_bench(bench_ckpt, size, reps, bench_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
