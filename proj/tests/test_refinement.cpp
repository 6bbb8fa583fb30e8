#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace stereonet;
using sn_test::random_tensor;
using sn_test::weighted_sum;

namespace {

void zero_final(RefinerParams<double>& p) {
  p.final.weight.value.fill(0.0);
  p.final.bias.value.fill(0.0);
}

}  // namespace

TEST(Dilations, Schedule) {
  EXPECT_EQ(refiner_dilations(), (std::vector<int>{1, 2, 4, 8, 1, 1}));
}

TEST(Mode, Parse) {
  EXPECT_EQ(parse_refinement_mode("multi"), RefinementMode::kMulti);
  EXPECT_EQ(parse_refinement_mode("single"), RefinementMode::kSingle);
  EXPECT_THROW(parse_refinement_mode("both"), Error);
}

TEST(Upsample, ConstantMapScalesWithFactor) {
  DisparityMap<double> d{Tensor<double>(Shape{3, 4, 1}, 3.0), 2};
  const auto up = upsample_disparity(d, 2);
  EXPECT_EQ(up.values.shape(), (Shape{6, 8, 1}));
  EXPECT_EQ(up.level, 1);
  for (double v : up.values.storage()) EXPECT_DOUBLE_EQ(v, 6.0);
}

TEST(Upsample, FactorOneIsIdentity) {
  DisparityMap<double> d{random_tensor<double>({3, 4, 1}, 1), 1};
  const auto up = upsample_disparity(d, 1);
  EXPECT_EQ(up.values.storage(), d.values.storage());
  EXPECT_EQ(up.level, 1);
  EXPECT_THROW(upsample_disparity(d, 0), Error);
}

TEST(Refine, ZeroResidualIsRelu) {
  Initializer init(2);
  auto p = build_refiner<double>("r", 8, init);
  zero_final(p);
  Tape<double> t(false);
  auto d = random_tensor<double>({6, 7, 1}, 3, -2.0, 5.0);
  d[0] = -0.5;
  auto out = refine(t, t.constant(d), t.constant(random_tensor<double>({6, 7, 3}, 4)), p, 10.0);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(out.value()[i], std::max(d[i], 0.0));
  EXPECT_EQ(out.value()[0], 0.0);
}

TEST(Refine, ResidualScalesWithNorm) {
  Initializer init(2);
  auto p = build_refiner<double>("r", 4, init);
  zero_final(p);
  p.final.bias.value[0] = 0.25;
  Tape<double> t(false);
  auto d = Tensor<double>(Shape{5, 5, 1}, 2.0);
  auto out = refine(t, t.constant(d), t.constant(random_tensor<double>({5, 5, 3}, 5)), p, 8.0);
  for (double v : out.value().storage()) EXPECT_DOUBLE_EQ(v, 4.0);
}

TEST(Refine, ResolutionMismatchThrows) {
  Initializer init(2);
  auto p = build_refiner<double>("r", 4, init);
  Tape<double> t(false);
  EXPECT_THROW(refine(t, t.constant(Tensor<double>(Shape{4, 4, 1})),
                      t.constant(Tensor<double>(Shape{4, 5, 3})), p, 1.0),
               ShapeError);
}

TEST(Refine, Gradient) {
  Initializer init(5);
  auto p = build_refiner<double>("r", 3, init);
  const auto guide = random_tensor<double>({6, 6, 3}, 6);
  auto fn = [&](Tape<double>& t, const Var<double>& d) {
    return weighted_sum(t, refine(t, d, t.constant(guide), p, 4.0));
  };
  GradCheckOptions opt;
  opt.max_coords = 20;
  // Keep d_up positive and the output away from the ReLU kink.
  EXPECT_LT(
      finite_diff_check<double>(fn, random_tensor<double>({6, 6, 1}, 7, 20.0, 30.0), 1e-5, opt)
          .max_rel_error,
      1e-5);
}

TEST(Hierarchy, MultiGivesFourMapsAtDecreasingLevels) {
  ModelConfig cfg;
  cfg.K = 3;
  cfg.max_disparity = 39;
  cfg.channels = 4;
  auto m = build_model<double>(cfg, 1);
  Tape<double> t(false);
  auto l = t.constant(random_tensor<double>({16, 32, 3}, 1));
  auto r = t.constant(random_tensor<double>({16, 32, 3}, 2));
  auto res = forward(t, m, l, r);
  ASSERT_EQ(res.maps.size(), 4u);
  EXPECT_EQ(res.levels, (std::vector<int>{3, 2, 1, 0}));
  for (std::size_t i = 0; i < 4; ++i) {
    const int k = res.levels[i];
    EXPECT_EQ(res.maps[i].shape(), (Shape{level_extent(16, k), level_extent(32, k), 1}));
    for (double v : res.maps[i].value().storage()) EXPECT_GE(v, 0.0);
  }
}

TEST(Hierarchy, SingleGivesTwoMaps) {
  ModelConfig cfg;
  cfg.K = 3;
  cfg.max_disparity = 39;
  cfg.channels = 4;
  cfg.mode = RefinementMode::kSingle;
  auto m = build_model<double>(cfg, 1);
  EXPECT_EQ(m.refiners.size(), 1u);
  Tape<double> t(false);
  auto res = forward(t, m, t.constant(random_tensor<double>({16, 24, 3}, 1)),
                     t.constant(random_tensor<double>({16, 24, 3}, 2)));
  ASSERT_EQ(res.maps.size(), 2u);
  EXPECT_EQ(res.levels, (std::vector<int>{3, 0}));
  EXPECT_EQ(res.maps[1].shape(), (Shape{16, 24, 1}));
}

TEST(Hierarchy, RefinerCountMismatchThrows) {
  Initializer init(1);
  std::vector<RefinerParams<double>> refiners{build_refiner<double>("r", 2, init)};
  HierarchyShape shape{3, 5, RefinementMode::kMulti};
  Tape<double> t(false);
  EXPECT_THROW(hierarchical_refine(t, t.constant(Tensor<double>(Shape{2, 2, 1})),
                                   t.constant(Tensor<double>(Shape{16, 16, 3})), refiners, shape),
               Error);
}

TEST(Hierarchy, DisparityNorm) {
  HierarchyShape shape{3, 5, RefinementMode::kMulti};
  EXPECT_DOUBLE_EQ(shape.disparity_norm(3), 5.0);
  EXPECT_DOUBLE_EQ(shape.disparity_norm(0), 40.0);
}

TEST(Model, UnrefinedParameterCountIsFrozen) {
  ModelConfig cfg;
  cfg.max_disparity = 39;
  auto m = build_model<float>(cfg, 1);
  EXPECT_EQ(m.unrefined_parameter_count(), 286529u);
  EXPECT_GE(m.unrefined_parameter_count(), 250000u);
  EXPECT_LE(m.unrefined_parameter_count(), 450000u);
  // The count does not depend on D.
  cfg.max_disparity = 191;
  EXPECT_EQ(build_model<float>(cfg, 1).unrefined_parameter_count(), 286529u);
}

TEST(Model, CastPreservesValues) {
  ModelConfig cfg;
  cfg.max_disparity = 15;
  cfg.K = 2;
  cfg.channels = 4;
  auto m = build_model<float>(cfg, 3);
  auto d = m.cast<double>();
  auto a = collect_params<float>(m);
  auto b = collect_params<double>(d);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i]->value.size(); ++j)
      EXPECT_EQ(double(a[i]->value[j]), b[i]->value[j]);
}

TEST(Model, MismatchedInputsThrow) {
  ModelConfig cfg;
  cfg.max_disparity = 15;
  cfg.K = 2;
  cfg.channels = 4;
  auto m = build_model<float>(cfg, 3);
  EXPECT_THROW(predict(m, Tensor<float>(Shape{8, 8, 3}), Tensor<float>(Shape{8, 12, 3})),
               ShapeError);
}
