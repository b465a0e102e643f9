#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "npv/common.hpp"

using namespace npv;

TEST(Box, RejectsEmptyOrInvertedIntervals) {
  EXPECT_THROW(Box({0.0}, {0.0}), ValidationError);
  EXPECT_THROW(Box({1.0}, {0.0}), ValidationError);
  EXPECT_THROW(Box({0.0, 0.0}, {1.0}), ValidationError);
}

TEST(Box, VolumeCenterContainment) {
  const Box b({0.0, -1.0}, {2.0, 1.0});
  EXPECT_DOUBLE_EQ(b.volume(), 4.0);
  EXPECT_EQ(b.center(), (std::vector<double>{1.0, 0.0}));
  EXPECT_TRUE(b.contains(std::vector<double>{2.0, 1.0}));
  EXPECT_FALSE(b.contains(std::vector<double>{2.1, 0.0}));
  EXPECT_TRUE(b.contains(Box({0.5, 0.0}, {1.0, 1.0})));
  EXPECT_TRUE(b.overlaps(Box({1.5, 0.5}, {3.0, 3.0})));
  EXPECT_FALSE(b.overlaps(Box({2.0, 0.0}, {3.0, 1.0})));  // touching faces only
  const std::vector<std::size_t> keep{1};
  EXPECT_EQ(b.project(keep), Box({-1.0}, {1.0}));
}

TEST(Rng, DerivedSeedsAreDeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(42, {1, 2}), derive_seed(42, {1, 2}));
  EXPECT_NE(derive_seed(42, {1, 2}), derive_seed(42, {2, 1}));
  EXPECT_NE(derive_seed(42, {1}), derive_seed(43, {1}));
  Rng a = make_rng(5, {3}), b = make_rng(5, {3});
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 17 || i == 80) throw std::runtime_error("at " + std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "at 17");
  }
}

TEST(Normal, ReferenceValues) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_pdf(1.0), 0.24197072451914337, 1e-16);
  // Standard normal table: P(-1 < Z < 1) = 0.682689492137086.
  EXPECT_NEAR(normal_mass(-1.0, 1.0), 0.682689492137086, 1e-14);
  EXPECT_NEAR(normal_mass(0.0, 1.0), 0.341344746068543, 1e-14);
  // Far tail keeps relative accuracy.
  const double tail = 0.5 * (std::erfc(8.0 / std::sqrt(2.0)) - std::erfc(9.0 / std::sqrt(2.0)));
  EXPECT_NEAR(normal_mass(8.0, 9.0) / tail, 1.0, 1e-10);
  EXPECT_NEAR(normal_mass(-9.0, -8.0) / tail, 1.0, 1e-10);
  EXPECT_DOUBLE_EQ(normal_mass(-INFINITY, INFINITY), 1.0);
}

TEST(PairwiseSum, MatchesExactSmallSums) {
  std::vector<double> v(1000, 0.1);
  EXPECT_NEAR(pairwise_sum(v), 100.0, 1e-12);
  EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
}

TEST(Text, DoublesRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(0.25), "0.25");
  EXPECT_THROW(parse_double("1x"), ValidationError);
  EXPECT_THROW(parse_double(""), ValidationError);
}
