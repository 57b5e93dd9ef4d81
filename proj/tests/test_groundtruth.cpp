#include <gtest/gtest.h>

#include "hyperbench/groundtruth.hpp"
#include "oracles.hpp"

using namespace hyperbench;

TEST(GroundTruth, ConstantCubeIsDegenerate) {
  HsiCube c(3, 3, 2, 0.7);
  try {
    (void)build_ground_truth(c, 1, 99);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate dynamic range"), std::string::npos);
  }
}

TEST(GroundTruth, FullRangeIsAffine) {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = i;
  const auto gt = build_ground_truth(HsiCube::from_data(10, 10, 1, v), 0, 100);
  for (int i = 0; i < 100; ++i) EXPECT_DOUBLE_EQ(gt.data()[static_cast<std::size_t>(i)], i / 99.0);
}

TEST(GroundTruth, InterpolatedPercentilesOn101Values) {
  std::vector<double> v(101);
  for (int i = 0; i <= 100; ++i) v[static_cast<std::size_t>(i)] = i;
  const auto gt = build_ground_truth(HsiCube::from_data(1, 1, 101, v), 1, 99);
  // the 1st and 99th percentiles of 0..100 are exactly 1 and 99
  EXPECT_EQ(gt.data()[0], 0.0);
  EXPECT_EQ(gt.data()[1], 0.0);
  EXPECT_DOUBLE_EQ(gt.data()[50], 0.5);
  EXPECT_EQ(gt.data()[99], 1.0);
  EXPECT_EQ(gt.data()[100], 1.0);
}

TEST(GroundTruth, MatchesBruteForceOracle) {
  const auto raw = oracle::random_cube(9, 7, 5, 11, -3.0, 40.0);
  const std::vector<double> flat(raw.data().begin(), raw.data().end());
  const double lo = oracle::percentile(flat, 2.5);
  const double hi = oracle::percentile(flat, 97.0);
  EXPECT_DOUBLE_EQ(percentile(raw.data(), 2.5), lo);
  const auto gt = build_ground_truth(raw, 2.5, 97.0);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double expect = (std::clamp(flat[i], lo, hi) - lo) / (hi - lo);
    EXPECT_NEAR(gt.data()[i], expect, 1e-15);
  }
}

TEST(GroundTruth, RangeMonotoneShapeAndWavelengths) {
  auto raw = oracle::random_cube(8, 8, 6, 5, 0.0, 1000.0);
  raw.set_wavelengths(std::vector<double>{400, 450, 500, 550, 600, 650});
  const auto gt = build_ground_truth(raw);
  ASSERT_TRUE(gt.same_shape(raw));
  EXPECT_EQ(gt.wavelengths(), raw.wavelengths());
  for (double v : gt.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (std::size_t a = 0; a < raw.size(); a += 7) {
    for (std::size_t b = 0; b < raw.size(); b += 5) {
      if (raw.data()[a] <= raw.data()[b]) {
        EXPECT_LE(gt.data()[a], gt.data()[b]);
      }
    }
  }
}

TEST(GroundTruth, IdempotentAtFullRange) {
  const auto raw = oracle::random_cube(6, 5, 4, 3, 2.0, 9.0);
  const auto once = build_ground_truth(raw, 0, 100);
  EXPECT_EQ(build_ground_truth(once, 0, 100), once);
}

TEST(GroundTruth, RejectsBadPercentiles) {
  const auto raw = oracle::random_cube(3, 3, 3, 1);
  EXPECT_THROW((void)build_ground_truth(raw, 50, 50), ParameterError);
  EXPECT_THROW((void)build_ground_truth(raw, -1, 99), ParameterError);
  EXPECT_THROW((void)build_ground_truth(raw, 1, 101), ParameterError);
}
