#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"

using namespace stereonet;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = STEREONET_FIXTURES;

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

std::uint32_t bits(float v) { return std::bit_cast<std::uint32_t>(v); }

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST(Pfm, RoundTripIsBitIdentical) {
  std::mt19937_64 rng(1);
  Tensor<float> t(Shape{4, 5, 1});
  for (auto& v : t.data()) v = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
  // Replace NaN payloads, which are not required to survive every path.
  for (auto& v : t.data()) if (std::isnan(v)) v = -1.5f;
  t[0] = std::numeric_limits<float>::denorm_min();
  t[1] = -std::numeric_limits<float>::denorm_min();
  t[2] = -0.0f;
  const auto path = temp_file("sn_rt.pfm").string();
  for (bool little : {true, false}) {
    write_pfm(path, t, 1.0, little);
    const auto back = read_pfm(path, 1).data;
    ASSERT_EQ(back.shape(), t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) ASSERT_EQ(bits(back[i]), bits(t[i])) << i;
  }
  fs::remove(path);
}

TEST(Pfm, ColorRoundTrip) {
  const auto t = sn_test::random_tensor<float>({3, 2, 3}, 4, -100, 100);
  const auto path = temp_file("sn_rgb.pfm").string();
  write_pfm(path, t);
  const auto back = read_pfm(path, 3).data;
  EXPECT_EQ(back.storage(), t.storage());
  fs::remove(path);
}

TEST(Pfm, NegativeScaleMeansLittleEndian) {
  const float v[2] = {1.25f, -3.5f};
  std::string body(reinterpret_cast<const char*>(v), sizeof v);
  const auto path = temp_file("sn_le.pfm");
  write_bytes(path, "Pf\n2 1\n-1.0\n" + body);
  const auto img = read_pfm(path.string(), 1);
  EXPECT_EQ(img.data[0], 1.25f);
  EXPECT_EQ(img.data[1], -3.5f);
  EXPECT_DOUBLE_EQ(img.scale, -1.0);
  EXPECT_TRUE(img.little_endian());
  fs::remove(path);
}

TEST(Pfm, BigEndianFixtureRowsAreFlipped) {
  const auto img =
      read_pfm((kFixtures / "sceneflow/disparity/TEST/A/0000/left/0006.pfm").string(), 1).data;
  ASSERT_EQ(img.shape(), (Shape{8, 16, 1}));
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 16; ++x)
      EXPECT_EQ(img.at(y, x, 0), float(double(y) + double(x) / 16.0));
}

TEST(Pfm, ColorHeaderOnGrayCallThrows) {
  const auto path = temp_file("sn_pf.pfm").string();
  write_pfm(path, Tensor<float>(Shape{2, 2, 3}));
  EXPECT_THROW(read_pfm(path, 1), IoError);
  fs::remove(path);
}

TEST(Pfm, MalformedInputsThrow) {
  const auto path = temp_file("sn_bad.pfm");
  write_bytes(path, "P5\n2 2\n-1\n");
  EXPECT_THROW(read_pfm(path.string()), IoError);
  write_bytes(path, "Pf\n2 x\n-1\n");
  EXPECT_THROW(read_pfm(path.string()), IoError);
  write_bytes(path, "Pf\n2 2\n-1\n" + std::string(10, '\0'));
  EXPECT_THROW(read_pfm(path.string()), IoError);
  EXPECT_THROW(read_pfm("/nonexistent.pfm"), IoError);
  fs::remove(path);
}

TEST(Ppm, FixtureParsesToKnownPixels) {
  const auto img = read_image((kFixtures / "tiny.ppm").string());
  ASSERT_EQ(img.shape(), (Shape{2, 3, 3}));
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 3; ++x) {
      EXPECT_EQ(img.at(y, x, 0), float(10 * (3 * y + x)));
      EXPECT_EQ(img.at(y, x, 1), float(100 + y));
      EXPECT_EQ(img.at(y, x, 2), float(200 + x));
    }
}

TEST(Ppm, WriteReadRoundTrip) {
  Tensor<float> t(Shape{2, 2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = float(i * 20);
  const auto path = temp_file("sn.ppm").string();
  write_ppm(path, t);
  EXPECT_EQ(read_image(path).storage(), t.storage());
  fs::remove(path);
}

TEST(Png, GrayIsReplicated) {
  const auto img = read_image((kFixtures / "gray_2x2.png").string());
  ASSERT_EQ(img.shape(), (Shape{2, 2, 3}));
  const float expect[4] = {0, 64, 128, 255};
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(img[p * 3 + c], expect[p]);
}

TEST(Png, SixteenBitImageRejected) {
  EXPECT_THROW(read_image((kFixtures / "kitti/disp_occ_0/000000_10.png").string()), IoError);
}

TEST(Png, RgbRoundTrip) {
  std::vector<unsigned char> rgb(4 * 3 * 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<unsigned char>(i * 7);
  const auto path = temp_file("sn_rgb.png").string();
  write_png_rgb8(path, 4, 3, rgb);
  const auto img = read_image(path);
  ASSERT_EQ(img.shape(), (Shape{3, 4, 3}));
  for (std::size_t i = 0; i < rgb.size(); ++i) EXPECT_EQ(img[i], float(rgb[i]));
  fs::remove(path);
}

TEST(Ramp, EndpointsAndInvalid) {
  const auto lo = disparity_color(0.0f, 20.0f), hi = disparity_color(20.0f, 20.0f);
  EXPECT_EQ(lo, kDisparityRamp.front());
  EXPECT_EQ(hi, kDisparityRamp.back());
  EXPECT_EQ(disparity_color(-5.0f, 20.0f), kDisparityRamp.front());
  EXPECT_EQ(disparity_color(std::nanf(""), 20.0f), (std::array<unsigned char, 3>{0, 0, 0}));
  EXPECT_EQ(disparity_color(10.0f, 20.0f), kDisparityRamp[4]);
}

TEST(Ramp, PngUsesRamp) {
  Tensor<float> d(Shape{1, 3, 1}, std::vector<float>{0.0f, 8.0f, std::nanf("")});
  const auto path = temp_file("sn_viz.png").string();
  write_disparity_png(path, d, 8.0f);
  const auto img = read_image(path);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(img[c], kDisparityRamp.front()[c]);
    EXPECT_EQ(img[3 + c], kDisparityRamp.back()[c]);
    EXPECT_EQ(img[6 + c], 0.0f);
  }
  fs::remove(path);
}

TEST(Normalize, AffineEndpoints) {
  Tensor<float> t(Shape{3}, std::vector<float>{0, 127.5f, 255});
  const auto n = normalize(t);
  EXPECT_EQ(n[0], -1.0f);
  EXPECT_EQ(n[1], 0.0f);
  EXPECT_EQ(n[2], 1.0f);
  // Applying twice is not the identity.
  EXPECT_NE(normalize(n)[2], n[2]);
}

TEST(SceneFlow, LoadsFixtureLayout) {
  const auto files = list_sceneflow(kFixtures / "sceneflow");
  ASSERT_EQ(files.size(), 1u);
  EXPECT_FALSE(files[0].gt_right.empty());
  const auto s = load_sample(files[0]);
  EXPECT_EQ(s.left.shape(), (Shape{8, 16, 3}));
  ASSERT_TRUE(s.gt_right.has_value());
  // The right map is stored negated and read back as magnitudes.
  EXPECT_EQ(s.gt_right->at(3, 8, 0), 3.5f);
  EXPECT_EQ(s.gt_left.at(3, 8, 0), 3.5f);
  EXPECT_EQ(mask_count(s.valid_left), 8u * 16u);
  EXPECT_THROW(list_sceneflow(kFixtures / "kitti"), IoError);
}

TEST(Kitti, SixteenBitDisparityAndMasks) {
  const auto files = list_kitti(kFixtures / "kitti");
  ASSERT_EQ(files.size(), 1u);
  const auto s = load_sample(files[0]);
  EXPECT_EQ(s.left.shape(), (Shape{8, 16, 3}));
  EXPECT_EQ(s.gt_left.at(1, 4, 0), 3.0f);  // 256 * (1 + 1 + 4 / 4)
  EXPECT_EQ(s.valid_left.at(0, 5, 0), 0);
  EXPECT_EQ(mask_count(s.valid_left), 7u * 16u);
  ASSERT_TRUE(s.nocc.has_value());
  EXPECT_EQ(mask_count(*s.nocc), 7u * 13u);
  EXPECT_FALSE(s.gt_right.has_value());
  const auto raw = read_kitti_disparity(files[0].gt_left.string());
  EXPECT_TRUE(std::isnan(raw.at(0, 0, 0)));
}

TEST(Synth, ZeroDisparityCopiesLeft) {
  SynthSpec spec;
  spec.field = ConstantField{0.0};
  const auto s = synth_pair(spec);
  EXPECT_EQ(s.left.storage(), s.right.storage());
  for (float v : s.gt_left.storage()) EXPECT_EQ(v, 0.0f);
}

TEST(Synth, IntegerShift) {
  SynthSpec spec;
  spec.field = ConstantField{5.0};
  const auto s = synth_pair(spec);
  for (std::size_t y = 0; y < s.height(); ++y)
    for (std::size_t x = 5; x < s.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(s.right.at(y, x - 5, c), s.left.at(y, x, c));
  EXPECT_EQ(s.valid_left.at(0, 4, 0), 0);
  EXPECT_EQ(s.valid_left.at(0, 5, 0), 1);
}

TEST(Synth, RampRightGroundTruthIsConsistent) {
  SynthSpec spec;
  spec.field = RampField{4.0, 0.05, 0.02};
  const auto s = synth_pair(spec);
  ASSERT_TRUE(s.gt_right.has_value());
  // A right pixel x' with disparity d' is seen by the left camera at x' + d'.
  for (std::size_t y = 0; y < s.height(); y += 7)
    for (std::size_t x = 0; x < 60; x += 5) {
      const double dr = s.gt_right->at(y, x, 0);
      const double xl = double(x) + dr;
      EXPECT_NEAR(4.0 + 0.05 * xl + 0.02 * double(y), dr, 1e-4);
    }
}

TEST(Synth, RejectsOutOfRangeDisparity) {
  SynthSpec spec;
  spec.field = ConstantField{-1.0};
  EXPECT_THROW(synth_pair(spec), Error);
  spec.field = ConstantField{32.0};
  EXPECT_THROW(synth_pair(spec), Error);
  spec.field = RampField{1.0, 0.6, 0.0};
  EXPECT_THROW(synth_pair(spec), Error);
}

TEST(Synth, RandomSpecsStayInRange) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto spec = random_synth_spec(rng, 128, 64, 20.0, i % 2 == 0);
    const auto [lo, hi] = disparity_range(spec);
    EXPECT_GE(lo, 0.0);
    EXPECT_LE(hi, 20.0);
  }
}
