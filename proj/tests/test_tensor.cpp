#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "stereonet/tensor.hpp"

using namespace stereonet;

TEST(Tensor, ShapeAndSize) {
  Tensor<float> t(Shape{2, 3, 4}, 1.5f);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.dim(2), 4u);
  for (float v : t.data()) EXPECT_EQ(v, 1.5f);
}

TEST(Tensor, ZeroExtentThrows) {
  EXPECT_THROW(Tensor<float>(Shape{2, 0, 3}), ShapeError);
}

TEST(Tensor, DataLengthMismatchThrows) {
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(Tensor, RowMajorChannelsLast) {
  Tensor<int> t(Shape{2, 3, 2});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<int>(i);
  EXPECT_EQ(t.at(0, 0, 1), 1);
  EXPECT_EQ(t.at(0, 1, 0), 2);
  EXPECT_EQ(t.at(1, 0, 0), 6);
  EXPECT_EQ(t.at(1, 2, 1), 11);
  EXPECT_THROW(t.at(1, 2), ShapeError);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor<float> t(Shape{2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  auto r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(r.storage(), t.storage());
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, CastRoundTrip) {
  Tensor<float> t(Shape{3}, std::vector<float>{0.5f, -2.0f, 3.25f});
  EXPECT_EQ(t.cast<double>().cast<float>(), t);
}

TEST(Tensor, FiniteCheck) {
  Tensor<float> t(Shape{4}, 1.0f);
  EXPECT_NO_THROW(require_finite(t, "test"));
  t[2] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(require_finite(t, "test"), NumericError);
  t[2] = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, ShapeToString) {
  EXPECT_EQ(to_string(Shape{4, 8, 32}), "[4x8x32]");
}
