#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace stereonet;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = STEREONET_FIXTURES;

struct CliResult {
  int code;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  CliResult run(const std::string& args, const std::string& env = "") const {
    const std::string err = path("stderr.txt");
    const std::string cmd =
        env + " \"" + std::string(STEREONET_CLI) + "\" " + args + " > /dev/null 2> \"" + err + "\"";
    const int status = std::system(cmd.c_str());
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
  }

  std::string write_config(const std::string& extra = "", long iterations = 2) const {
    const std::string cfg = path("run.cfg");
    std::ofstream(cfg) << "K = 2\nD = 15\nchannels = 4\nresidual_gain = 0.001\n"
                       << "iterations = " << iterations << "\n"
                       << "synth_count = 2\nsynth_width = 64\nsynth_height = 32\n"
                       << "synth_max_disp = 10\n"
                       << "checkpoint = " << path("model.ckpt") << "\n"
                       << "loss_csv = " << path("loss.csv") << "\n"
                       << extra;
    return cfg;
  }

  std::string trained_checkpoint() const {
    const auto r = run("train --config " + write_config());
    EXPECT_EQ(r.code, 0) << r.err;
    return path("model.ckpt");
  }

  void write_pair(std::size_t w, std::size_t h, const std::string& l, const std::string& r) const {
    SynthSpec spec;
    spec.width = 128;
    spec.height = 64;
    spec.field = ConstantField{4.5};
    const auto s = synth_pair(spec);
    auto crop = [&](const Tensor<float>& img, std::size_t cw, std::size_t ch) {
      Tensor<float> out(Shape{ch, cw, 3});
      for (std::size_t y = 0; y < ch; ++y)
        for (std::size_t x = 0; x < cw; ++x)
          for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = std::round(img.at(y, x, c));
      return out;
    };
    write_ppm(l, crop(s.left, w, h));
    write_ppm(r, crop(s.right, w, h));
  }

  std::size_t line_count(const std::string& file) const {
    std::ifstream in(file);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) n += !line.empty();
    return n;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, TrainWritesCheckpointAndLossCsv) {
  trained_checkpoint();
  EXPECT_TRUE(fs::exists(path("model.ckpt")));
  EXPECT_EQ(line_count(path("loss.csv")), 3u);
  auto st = load_checkpoint(path("model.ckpt"));
  EXPECT_EQ(st.step, 2);
  EXPECT_EQ(st.model.config.K, 2);
}

TEST_F(Cli, ResumeContinuesFromCheckpoint) {
  trained_checkpoint();
  const auto r = run("train --resume --config " + write_config("", 4));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_checkpoint(path("model.ckpt")).step, 4);
  EXPECT_EQ(line_count(path("loss.csv")), 5u);
}

TEST_F(Cli, ResumeRejectsDifferentArchitecture) {
  trained_checkpoint();
  std::ofstream(path("other.cfg")) << "K = 3\nD = 15\nchannels = 4\niterations = 4\n"
                                   << "checkpoint = " << path("model.ckpt") << "\n"
                                   << "loss_csv = " << path("loss.csv") << "\n";
  EXPECT_NE(run("train --resume --config " + path("other.cfg")).code, 0);
}

TEST_F(Cli, TrainRejectsIndivisibleDisparity) {
  const std::string cfg = path("bad.cfg");
  std::ofstream(cfg) << "K = 3\nD = 40\n";
  const auto r = run("train --config " + cfg);
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("(D + 1) must be divisible by 2^K"), std::string::npos) << r.err;
}

TEST_F(Cli, TrainMissingConfigFails) {
  EXPECT_NE(run("train --config " + path("missing.cfg")).code, 0);
}

TEST_F(Cli, InferWritesPfmAndViz) {
  const auto ckpt = trained_checkpoint();
  write_pair(64, 32, path("l.ppm"), path("r.ppm"));
  const auto r = run("infer --checkpoint " + ckpt + " --left " + path("l.ppm") + " --right " +
                     path("r.ppm") + " --out " + path("d.pfm") + " --viz " + path("d.png"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto d = read_pfm(path("d.pfm"), 1).data;
  EXPECT_EQ(d.shape(), (Shape{32, 64, 1}));
  for (float v : d.storage()) EXPECT_GE(v, 0.0f);
  const auto viz = read_image(path("d.png"));
  EXPECT_EQ(viz.shape(), (Shape{32, 64, 3}));
  // Every pixel is a ramp color.
  for (std::size_t p = 0; p < 32 * 64; ++p) {
    const auto expect = disparity_color(d[p], 15.0f);
    for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(viz[p * 3 + c], float(expect[c]));
  }
}

TEST_F(Cli, InferRejectsMismatchedSizes) {
  const auto ckpt = trained_checkpoint();
  write_pair(64, 32, path("l.ppm"), path("unused.ppm"));
  write_pair(56, 32, path("unused2.ppm"), path("r.ppm"));
  const auto r = run("infer --checkpoint " + ckpt + " --left " + path("l.ppm") + " --right " +
                     path("r.ppm") + " --out " + path("d.pfm"));
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(fs::exists(path("d.pfm")));
}

TEST_F(Cli, InferRejectsConfigMismatch) {
  const auto ckpt = trained_checkpoint();
  write_pair(64, 32, path("l.ppm"), path("r.ppm"));
  std::ofstream(path("k3.cfg")) << "K = 3\nD = 39\n";
  const auto r = run("infer --checkpoint " + ckpt + " --left " + path("l.ppm") + " --right " +
                     path("r.ppm") + " --out " + path("d.pfm") + " --config " + path("k3.cfg"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("does not match"), std::string::npos) << r.err;
}

TEST_F(Cli, EvalTwoPixelFixture) {
  const auto r = run("eval --pred " + (kFixtures / "eval_2px/pred.pfm").string() + " --gt " +
                     (kFixtures / "eval_2px/gt.pfm").string() + " --report " + path("r.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("r.csv"));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "epe_all,epe_nocc,bad_1px,bad_2px,bad_3px,subpixel_precision,n_pixels");
  EXPECT_EQ(row, "0.5,0.5,0,0,0,0,2");
}

TEST_F(Cli, EvalIdenticalMapsGiveZero) {
  const auto gt = (kFixtures / "eval_2px/gt.pfm").string();
  ASSERT_EQ(run("eval --pred " + gt + " --gt " + gt + " --report " + path("r.csv")).code, 0);
  std::ifstream in(path("r.csv"));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(row.substr(0, 4), "0,0,");
}

TEST_F(Cli, EvalMissingGroundTruthFails) {
  const auto r = run("eval --pred " + (kFixtures / "eval_2px/pred.pfm").string() + " --gt " +
                     path("none.pfm") + " --report " + path("r.csv"));
  EXPECT_NE(r.code, 0);
}

TEST_F(Cli, BenchEmitsStageRows) {
  const auto ckpt = trained_checkpoint();
  const auto r = run("bench --checkpoint " + ckpt + " --size 64x32 --reps 5 --out " + path("b.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("b.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "stage,ms,percent");
  std::vector<std::string> stages;
  double sum = 0;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    stages.push_back(line.substr(0, a));
    if (stages.back() != "total") sum += std::stod(line.substr(b + 1));
  }
  EXPECT_EQ(stages, (std::vector<std::string>{"feature", "volume", "filter", "refine_L1",
                                              "refine_L0", "total"}));
  EXPECT_NEAR(sum, 100.0, 5.0);
  EXPECT_NE(run("bench --checkpoint " + ckpt + " --reps 4").code, 0);
  EXPECT_NE(run("bench --checkpoint " + ckpt + " --size 64").code, 0);
}

TEST_F(Cli, ThreadVariable) {
  const auto cfg = write_config();
  EXPECT_EQ(run("train --config " + cfg, "STEREONET_THREADS=1").code, 0);
  EXPECT_NE(run("train --config " + cfg, "STEREONET_THREADS=abc").code, 0);
  EXPECT_NE(run("train --config " + cfg, "STEREONET_THREADS=-2").code, 0);
}

TEST_F(Cli, UnknownSubcommandFails) {
  EXPECT_NE(run("frobnicate").code, 0);
  EXPECT_NE(run("").code, 0);
}
