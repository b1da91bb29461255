#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rdmd/data.hpp"
#include "testing.hpp"

using namespace rdmd;

namespace {

// Direct O(n^2) energy distance with the V-statistic convention.
double energy_distance_reference(const Tensor& a, const Tensor& b) {
  auto mean_dist = [](const Tensor& x, const Tensor& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < y.rows(); ++j) s += std::hypot(x.at(i, 0) - y.at(j, 0), x.at(i, 1) - y.at(j, 1));
    return s / static_cast<double>(x.rows() * y.rows());
  };
  return 2 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

PairSet pairs_of(std::initializer_list<std::initializer_list<double>> in,
                 std::initializer_list<std::initializer_list<double>> out) {
  return PairSet(Tensor::matrix(in), Tensor::matrix(out));
}

}  // namespace

TEST(Data, SourceIsStandardNormal) {
  Rng rng(1);
  const Tensor x = sample_source_gaussian(50000, rng);
  double m = 0, v = 0;
  for (double e : x.values()) m += e, v += e * e;
  m /= static_cast<double>(x.numel());
  v /= static_cast<double>(x.numel());
  EXPECT_NEAR(m, 0.0, 0.02);
  EXPECT_NEAR(v, 1.0, 0.02);
}

TEST(Data, EightGaussiansLieOnTheCircle) {
  Rng rng(2);
  const EightGaussians geo{};
  const Tensor x = sample_8gaussians(20000, rng, geo);
  std::vector<int> counts(8, 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double ang = std::atan2(x.at(i, 1), x.at(i, 0));
    const int k = static_cast<int>(std::lround(ang / (std::numbers::pi / 4)) + 8) % 8;
    ++counts[k];
    const double cx = geo.radius * std::cos(k * std::numbers::pi / 4), cy = geo.radius * std::sin(k * std::numbers::pi / 4);
    EXPECT_LT(std::hypot(x.at(i, 0) - cx, x.at(i, 1) - cy), 8 * geo.std);
  }
  for (int c : counts) EXPECT_NEAR(c, 2500, 200);
}

TEST(Data, SamplersAreSeeded) {
  Rng a(5), b(5);
  EXPECT_EQ(sample_8gaussians(100, a), sample_8gaussians(100, b));
}

TEST(Data, TransportCost) {
  const PairSet p = pairs_of({{0, 0}, {1, 1}}, {{3, 4}, {1, 1}});
  EXPECT_DOUBLE_EQ(transport_cost_sq(p), 12.5);
  EXPECT_DOUBLE_EQ(transport_cost_rms(p), std::sqrt(25.0 / 4.0));
  const PairSet id = pairs_of({{0.3, -2}}, {{0.3, -2}});
  EXPECT_EQ(transport_cost_rms(id), 0.0);
}

TEST(Data, EnergyDistanceMatchesReferenceAndProperties) {
  Rng rng(3);
  const Tensor a = support::random_tensor({60, 2}, rng, 2.0);
  const Tensor b = support::random_tensor({45, 2}, rng, 3.0);
  EXPECT_NEAR(energy_distance(a, b), energy_distance_reference(a, b), 1e-12);
  EXPECT_NEAR(energy_distance(a, b), energy_distance(b, a), 1e-12);
  EXPECT_EQ(energy_distance(a, a), 0.0);
  EXPECT_GT(energy_distance(a, b), 0.0);
  EXPECT_THROW(energy_distance(a, Tensor({3, 3})), ShapeError);
}

TEST(Data, EnergyDistanceGrowsWithShift) {
  Rng rng(4);
  const Tensor a = sample_source_gaussian(400, rng);
  double last = 0.0;
  for (double shift : {0.5, 1.0, 2.0, 4.0}) {
    Tensor b = a;
    for (std::size_t i = 0; i < b.rows(); ++i) b.at(i, 0) += shift;
    const double e = energy_distance(a, b);
    EXPECT_GT(e, last);
    last = e;
  }
}

TEST(Data, SlicedW2OfShiftedCopy) {
  // Shifting by v gives E_theta (theta . v)^2 = |v|^2 / d over uniform directions.
  Rng rng(5);
  const Tensor a = sample_source_gaussian(500, rng);
  Tensor b = a;
  for (std::size_t i = 0; i < b.rows(); ++i) b.at(i, 0) += 2.0;
  Rng proj(6);
  EXPECT_NEAR(sliced_w2(a, b, 4000, proj), 2.0, 0.1);
  Rng proj2(6);
  EXPECT_NEAR(sliced_w2(a, a, 10, proj2), 0.0, 1e-15);
}

TEST(Data, SlicedW2UnequalSizes) {
  Rng rng(7);
  const Tensor a = sample_source_gaussian(300, rng);
  const Tensor b = sample_source_gaussian(200, rng);
  Rng proj(8);
  const double d = sliced_w2(a, b, 64, proj);
  EXPECT_GE(d, 0.0);
  EXPECT_LT(d, 0.1);
}

TEST(Data, SegmentsCross) {
  const double a[2] = {0, 0}, b[2] = {2, 2}, c[2] = {0, 2}, d[2] = {2, 0}, e[2] = {3, 3}, f[2] = {1, 1};
  EXPECT_TRUE(segments_cross(a, b, c, d));
  EXPECT_FALSE(segments_cross(a, c, b, d));  // parallel
  EXPECT_FALSE(segments_cross(a, f, f, e));  // shared endpoint
  EXPECT_FALSE(segments_cross(a, b, f, e));  // collinear overlap
}

TEST(Data, CrossingCountSmallConfigurations) {
  Rng rng(9);
  // Identity map: zero-length segments never cross.
  const Tensor x = sample_source_gaussian(200, rng);
  EXPECT_EQ(crossing_count(PairSet(x, x), 200, rng), 0u);
  // A rotation by pi maps every segment through the origin: all pairs cross.
  Tensor y = x;
  for (double& v : y.values()) v = -v;
  EXPECT_EQ(crossing_count(PairSet(x, y), 50, rng), 50u * 49u / 2u);
  // Scaling is cyclically monotone: no crossings.
  Tensor z = x;
  for (double& v : z.values()) v *= 1.5;
  EXPECT_EQ(crossing_count(PairSet(x, z), 200, rng), 0u);
}

TEST(Data, CrossingCountRejectsBadInput) {
  Rng rng(10);
  const Tensor x3 = support::random_tensor({10, 3}, rng);
  EXPECT_THROW(crossing_count(PairSet(x3, x3), 5, rng), std::invalid_argument);
  const Tensor x2 = support::random_tensor({10, 2}, rng);
  EXPECT_THROW(crossing_count(PairSet(x2, x2), 1, rng), std::invalid_argument);
}

TEST(Data, PairSetShapesMustAgree) {
  EXPECT_THROW(PairSet(Tensor({3, 2}), Tensor({4, 2})), ShapeError);
}
