#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "test_util.hpp"

using namespace stereonet;
using sn_test::random_tensor;
using sn_test::weighted_sum;

namespace {

Tensor<double> costs(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>(Shape{1, 1, n}, std::move(v));
}

}  // namespace

TEST(Candidates, SizeFormula) {
  EXPECT_EQ(coarse_candidates(191, 3), 24u);
  EXPECT_EQ(coarse_candidates(191, 4), 12u);
  EXPECT_EQ(coarse_candidates(39, 3), 5u);
  EXPECT_EQ(coarse_candidates(0, 0), 1u);
}

TEST(Candidates, IndivisibleThrowsWithFormula) {
  try {
    coarse_candidates(190, 3);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("divisible by 2^K"), std::string::npos);
  }
  EXPECT_THROW(coarse_candidates(-1, 1), Error);
}

TEST(FormVolume, SelfMatchSliceIsZero) {
  const auto f = random_tensor<double>({4, 6, 3}, 1);
  const auto raw = form_cost_volume(f, f, 3);
  EXPECT_EQ(raw.shape(), (Shape{4, 6, 3, 3}));
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 6; ++x)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(raw.at(y, x, 0, c), 0.0);
}

TEST(FormVolume, ShiftedRightMatchesAtOne) {
  // Left pixel x corresponds to right pixel x - 1.
  const auto l = random_tensor<double>({3, 8, 2}, 2);
  Tensor<double> r(l.shape());
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x + 1 < 8; ++x)
      for (std::size_t c = 0; c < 2; ++c) r.at(y, x, c) = l.at(y, x + 1, c);
  const auto raw = form_cost_volume(l, r, 4);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 1; x < 8; ++x)
      for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(raw.at(y, x, 1, c), 0.0);
}

TEST(FormVolume, ClampsAtLeftBorder) {
  const auto l = random_tensor<double>({1, 3, 1}, 3);
  const auto r = random_tensor<double>({1, 3, 1}, 4);
  const auto raw = form_cost_volume(l, r, 3);
  EXPECT_DOUBLE_EQ(raw.at(0, 1, 2, 0), l.at(0, 1, 0) - r.at(0, 0, 0));
  EXPECT_DOUBLE_EQ(raw.at(0, 0, 2, 0), l.at(0, 0, 0) - r.at(0, 0, 0));
}

TEST(FormVolume, FullScaleShape) {
  const auto f = random_tensor<float>({8, 16, 32}, 5);
  EXPECT_EQ(form_cost_volume(f, f, 4).shape(), (Shape{8, 16, 4, 32}));
}

TEST(FormVolume, ShapeMismatchThrows) {
  EXPECT_THROW(form_cost_volume(Tensor<double>(Shape{2, 3, 1}), Tensor<double>(Shape{2, 4, 1}), 2),
               ShapeError);
}

TEST(FormVolume, Gradient) {
  const auto r = random_tensor<double>({3, 5, 2}, 7);
  auto fn = [&](Tape<double>& t, const Var<double>& l) {
    return weighted_sum(t, form_cost_volume(t, l, t.constant(r), 3));
  };
  EXPECT_LT(finite_diff_check<double>(fn, random_tensor<double>({3, 5, 2}, 8), 1e-5).max_rel_error,
            1e-5);
  const auto l = random_tensor<double>({3, 5, 2}, 9);
  auto fr = [&](Tape<double>& t, const Var<double>& rv) {
    return weighted_sum(t, form_cost_volume(t, t.constant(l), rv, 3));
  };
  EXPECT_LT(finite_diff_check<double>(fr, r, 1e-5).max_rel_error, 1e-5);
}

TEST(Filter, OutputShape) {
  Initializer init(1);
  auto p = build_cost_filter<float>(32, init);
  const auto raw = random_tensor<float>({8, 16, 4, 32}, 1);
  EXPECT_EQ(filter_cost_volume(raw, p).shape(), (Shape{8, 16, 4}));
}

TEST(Filter, ZeroWeightsGiveZeroCosts) {
  Initializer init(1);
  auto p = build_cost_filter<double>(4, init);
  p.visit([](Param<double>& q) {
    if (q.name.find(".bn") == std::string::npos) q.value.fill(0.0);
  });
  const auto out = filter_cost_volume(random_tensor<double>({3, 4, 2, 4}, 2), p);
  for (double v : out.storage()) EXPECT_EQ(v, 0.0);
}

TEST(Filter, Gradient) {
  Initializer init(3);
  auto p = build_cost_filter<double>(2, init, 2);
  auto fn = [&](Tape<double>& t, const Var<double>& raw) {
    return sn_test::weighted_sum(t, filter_cost_volume(t, raw, p));
  };
  GradCheckOptions opt;
  opt.max_coords = 40;
  EXPECT_LT(
      finite_diff_check<double>(fn, random_tensor<double>({3, 4, 3, 2}, 4), 1e-5, opt).max_rel_error,
      1e-5);
}

TEST(HardArgmin, PicksMinimum) {
  EXPECT_EQ(hard_argmin(costs({3, 1, 2})).values[0], 1.0);
}

TEST(HardArgmin, TieGoesToSmaller) {
  EXPECT_EQ(hard_argmin(costs({1, 1, 5})).values[0], 0.0);
}

TEST(HardArgmin, InvariantToPerPixelOffset) {
  auto c = random_tensor<double>({4, 5, 6}, 11);
  const auto a = hard_argmin(c).values;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t d = 0; d < 6; ++d) c[i * 6 + d] += 3.0 * double(i) - 7.0;
  EXPECT_EQ(hard_argmin(c).values.storage(), a.storage());
}

TEST(SoftArgmin, UniformCostsGiveCenter) {
  EXPECT_NEAR(soft_argmin(costs({2, 2, 2, 2}))[0], 1.5, 1e-12);
}

TEST(SoftArgmin, HandEvaluation) {
  // 3 e^-10 / (1 + 3 e^-10) * 2 = 6 e^-10 / (1 + 3 e^-10)
  const double e = std::exp(-10.0);
  const double expect = (e + 2 * e + 3 * e) / (1 + 3 * e);
  EXPECT_NEAR(soft_argmin(costs({0, 10, 10, 10}))[0], expect, 1e-15);
  EXPECT_NEAR(expect, 2.72e-4, 1e-6);
}

TEST(SoftArgmin, StaysInRangeForExtremeCosts) {
  const auto c = random_tensor<double>({6, 7, 5}, 12, -1e4, 1e4);
  const auto d = soft_argmin(c);
  for (double v : d.storage()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 4.0);
  }
}

TEST(SoftArgmin, Gradient) {
  auto fn = [](Tape<double>& t, const Var<double>& c) {
    return weighted_sum(t, soft_argmin(t, c));
  };
  EXPECT_LT(finite_diff_check<double>(fn, random_tensor<double>({3, 4, 5}, 13, -2, 2), 1e-5)
                .max_rel_error,
            1e-5);
}

TEST(Sample, DegenerateCandidateDominates) {
  Tensor<double> c(Shape{100, 100, 4}, 0.0);
  for (std::size_t i = 0; i < 10000; ++i) c[i * 4 + 2] = -1000.0;
  const auto d = sample_disparity(c, 7).values;
  std::size_t hits = 0;
  for (double v : d.storage()) hits += v == 2.0;
  EXPECT_GT(double(hits) / 10000.0, 0.999);
}

TEST(Sample, UniformFrequencies) {
  Tensor<double> c(Shape{100, 100, 4}, 0.0);
  const auto d = sample_disparity(c, 8).values;
  std::map<double, int> freq;
  for (double v : d.storage()) ++freq[v];
  ASSERT_EQ(freq.size(), 4u);
  for (const auto& [k, n] : freq) EXPECT_NEAR(n / 10000.0, 0.25, 0.02) << k;
}

TEST(Sample, SameSeedSameMap) {
  const auto c = random_tensor<double>({5, 5, 6}, 14);
  EXPECT_EQ(sample_disparity(c, 3).values.storage(), sample_disparity(c, 3).values.storage());
}
