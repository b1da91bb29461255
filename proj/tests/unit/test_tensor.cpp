#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rdmd/tensor.hpp"

using rdmd::Shape;
using rdmd::ShapeError;
using rdmd::Tensor;

TEST(Tensor, ConstructsZeroFilledRowMajor) {
  Tensor t({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  for (double v : t.values()) EXPECT_EQ(v, 0.0);
  t.at(1, 2) = 5.0;
  EXPECT_EQ(t[5], 5.0);
}

TEST(Tensor, ScalarHasRankZero) {
  const Tensor s = Tensor::scalar(3.5);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.numel(), 1u);
  EXPECT_EQ(s.item(), 3.5);
}

TEST(Tensor, ItemRejectsNonScalar) { EXPECT_THROW(Tensor({2}).item(), std::logic_error); }

TEST(Tensor, MatrixLiteral) {
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(m.shape(), (Shape{3, 2}));
  EXPECT_EQ(m.at(2, 1), 6.0);
}

TEST(Tensor, FromValuesRejectsNonFinite) {
  EXPECT_THROW(Tensor::from_values({2}, {1.0, std::nan("")}), std::invalid_argument);
  EXPECT_THROW(Tensor::from_values({1}, {std::numeric_limits<double>::infinity()}), std::invalid_argument);
  EXPECT_NO_THROW(Tensor::from_values({2}, {1.0, -2.0}));
}

TEST(Tensor, ValueCountMustMatchShape) {
  EXPECT_THROW(Tensor::from_values({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST(Tensor, ZeroExtentRejected) { EXPECT_THROW(Tensor(Shape{0, 3}), std::invalid_argument); }

TEST(Tensor, ReshapeKeepsValues) {
  const Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.at(2, 0), 5.0);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, ShapeErrorNamesOpAndShapes) {
  const ShapeError e("matmul", {2, 3}, {4, 5});
  EXPECT_EQ(e.op(), "matmul");
  const std::string msg = e.what();
  EXPECT_NE(msg.find("matmul"), std::string::npos);
  EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
  EXPECT_NE(msg.find("[4, 5]"), std::string::npos);
}

TEST(Tensor, AllFiniteAndMaxAbsDiff) {
  Tensor a({3});
  EXPECT_TRUE(a.all_finite());
  a[1] = std::nan("");
  EXPECT_FALSE(a.all_finite());
  const Tensor x = Tensor::from_values({3}, {1, 2, 3});
  const Tensor y = Tensor::from_values({3}, {1, 2.5, 2});
  EXPECT_DOUBLE_EQ(rdmd::max_abs_diff(x, y), 1.0);
  EXPECT_THROW(rdmd::max_abs_diff(x, Tensor({2})), ShapeError);
}
