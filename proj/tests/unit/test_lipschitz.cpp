#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "npv/lipschitz.hpp"

using namespace npv;

namespace {

const double kG20 = 1.0 / (2.0 * std::sqrt(kPi));

// y = w, independent of x.
class NoiseOnly final : public ConditionalSampler {
 public:
  std::size_t x_dim() const override { return 1; }
  std::size_t y_dim() const override { return 1; }
  void sample(std::span<const double>, Rng& rng, std::span<double> y) const override {
    y[0] = std::normal_distribution<double>()(rng);
  }
};

BuiltinSystem diagonal_system(double a0, double a1) {
  SystemSpec spec{2, {"a"}, Box::cube(2, -1.0, 1.0), Box::cube(2, -5.0, 5.0)};
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = a0;
  A(1, 1) = a1;
  return BuiltinSystem(SystemKind::linear_gaussian, spec,
                       LinearGaussianParams{{A}, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)});
}

void expect_report_invariants(const LipschitzReport& r) {
  ASSERT_FALSE(r.per_dimension.empty());
  EXPECT_EQ(r.overall, *std::max_element(r.per_dimension.begin(), r.per_dimension.end()));
  EXPECT_EQ(r.overall, r.per_dimension[r.argmax_dim]);
  EXPECT_GE(r.overall, 0.0);
  EXPECT_GE(r.interval_lo, 0.0);
  EXPECT_TRUE(r.contains(r.overall));
  const double half = std::sqrt(*std::max_element(r.eps3.begin(), r.eps3.end()));
  EXPECT_NEAR(r.interval_hi - r.overall, half, 1e-12);
  EXPECT_EQ(r.per_iteration.size(), r.m);
}

}  // namespace

TEST(Eps3, OneDimensionalHandValues) {
  // 2 G20 + (1/4) (1 + 1)^2 = 1/sqrt(pi) + 1
  EXPECT_NEAR(asymptotic_eps3_1d(1, 1, 1, 1, 1, 1, 2), 1.0 / std::sqrt(kPi) + 1.0, 1e-15);
  EXPECT_NEAR(asymptotic_eps3_1d(1, 1, 1, 1, 1, 1, 2), 1.56419, 1e-5);
  // extra factor G22 = 1/(4 sqrt(pi)) on the first term
  EXPECT_NEAR(asymptotic_eps3_1d(1, 1, 1, 1, 1, 1, 2, Eps3Variant::appendix), 1.0 / (4.0 * kPi) + 1.0, 1e-15);
  const double base = asymptotic_eps3_1d(1, 1, 1, 1, 1, 1, 2);
  EXPECT_NEAR(asymptotic_eps3_1d(1, 1, 1, 2, 1, 1, 2) - base, 1.0 / std::sqrt(kPi), 1e-15);
  EXPECT_THROW(asymptotic_eps3_1d(1, 0, 1, 1, 1, 1, 2), ValidationError);
  EXPECT_THROW(asymptotic_eps3_1d(1, 1, 1, 1, 1, -1, 2), ValidationError);
}

TEST(Eps3, OneDimensionalRate) {
  for (double n : {1e6, 4e6, 1.6e7}) {
    const double h = std::pow(n, -0.125), h4 = std::pow(4 * n, -0.125);
    const double r = asymptotic_eps3_1d(4 * n, h4, h4, 1, 0.5, 0.5, 2) / asymptotic_eps3_1d(n, h, h, 1, 0.5, 0.5, 2);
    EXPECT_NEAR(r, 0.5, 0.025);
  }
  double prev = INFINITY;
  for (double n : {1e4, 3e4, 6e4, 1e5}) {
    const double h = std::pow(n, -0.125);
    const double e = asymptotic_eps3_1d(n, h, h, 1, 0.5, 0.5, 2);
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(Eps3, MultiDimensionalHandValues) {
  const std::vector<double> one{1.0, 1.0};
  // C = 0.16 G20^3; A_0 = 2 (y terms) + 1 (x term s != 0) = 3, 3^2 / 4 = 2.25
  const double first = 0.16 * kG20 * kG20 * kG20;
  EXPECT_NEAR(first, 0.0035918, 1e-7);
  EXPECT_NEAR(asymptotic_eps3_multi(1, one, one, 1, 1, 0.16, 0), first + 2.25, 1e-15);
  EXPECT_NEAR(asymptotic_eps3_multi(1, one, one, 1, 1, 0.16, 1, 2.0), first + 1.0, 1e-15);

  // d = 1: C / (n hx^3 hy) + hx^4 (bound hy^2/hx^2)^2 / 4
  const std::vector<double> hx{0.3}, hy{0.5};
  const double want = 2.0 * kG20 * 0.7 / (100.0 * 0.027 * 0.5) + std::pow(0.3, 4) * std::pow(0.4 * 0.25 / 0.09, 2) / 4.0;
  EXPECT_NEAR(asymptotic_eps3_multi(100, hx, hy, 0.7, 0.4, 2.0, 0), want, 1e-14);
  EXPECT_THROW(asymptotic_eps3_multi(1, one, one, 1, 1, 0.16, 2), ValidationError);
}

TEST(Eps3, MultiDimensionalRate) {
  // h = n^(-1/10) at d = 2 gives n^(-2/5) for both terms.
  for (double n : {1e6, 4e6}) {
    const std::vector<double> h(2, std::pow(n, -0.1)), h4(2, std::pow(4 * n, -0.1));
    const double r =
        asymptotic_eps3_multi(4 * n, h4, h4, 0.5, 0.5, 0.16, 0) / asymptotic_eps3_multi(n, h, h, 0.5, 0.5, 0.16, 0);
    EXPECT_NEAR(r, std::pow(4.0, -0.4), 0.05 * std::pow(4.0, -0.4));
  }
}

TEST(PartitionSize, HandValues) {
  EXPECT_NEAR(partition_size(0.1, 3, 0.0722, 0.64), 0.1 / (3 * 0.0722 * 0.64), 1e-15);
  EXPECT_NEAR(partition_size(0.1, 3, 0.0722, 0.64), 0.7214, 1e-4);
  EXPECT_DOUBLE_EQ(partition_size(0.1, 3, 2 * 0.0722, 0.64), 0.5 * partition_size(0.1, 3, 0.0722, 0.64));
  EXPECT_DOUBLE_EQ(partition_size(3 * 0.5 * 2, 3, 0.5, 2), 1.0);
  EXPECT_THROW(partition_size(0, 3, 1, 1), ValidationError);
}

TEST(Config, AutoGridAndValidation) {
  EXPECT_EQ(auto_grid_resolution(2), 50u);
  EXPECT_EQ(auto_grid_resolution(3), 15u);
  EXPECT_EQ(auto_grid_resolution(4), 15u);
  EXPECT_EQ(auto_grid_resolution(6), 7u);
  EXPECT_EQ(auto_grid_resolution(8), 4u);
  LcConfig c;
  c.grid_resolution = 1;
  EXPECT_THROW(c.validate(), ValidationError);
  c.grid_resolution = 0;
  c.m = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.m = 1;
  c.policy = BandwidthPolicy::explicit_values;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(GridMax, NestedGridsAndRefinement) {
  auto sys = systems::univariate_linear();
  const auto s = generate_samples(sys, 0, sys.spec().domain, 3000, 4);
  const double h = theoretical_bandwidth(3000, 1);
  CondDensityEstimator est(s, KernelSpec{KernelFamily::gaussian, {h}, {h}});
  const Box xb = sys.spec().domain, yb = sys.spec().successor_domain;
  // Every point of the r-grid is also on the (2r - 1)-grid.
  for (std::size_t r : {5u, 11u, 26u}) {
    const auto coarse = grid_max_abs_partial(est, xb, yb, r);
    const auto fine = grid_max_abs_partial(est, xb, yb, 2 * r - 1);
    EXPECT_GE(fine.max_abs[0], coarse.max_abs[0] - 1e-12);
    auto refined = coarse;
    refine_grid_max(est, xb, yb, r, refined);
    EXPECT_GE(refined.max_abs[0], coarse.max_abs[0]);
    // The stored argmax reproduces the maximum.
    EXPECT_NEAR(std::abs(est.partial(coarse.argmax_x[0], coarse.argmax_y[0], 0)), coarse.max_abs[0], 1e-12);
  }
}

TEST(EstimateLc, DegenerateSamplerGivesSmallEstimate) {
  LcConfig c;
  c.m = 5;
  const auto r = estimate_lc(NoiseOnly{}, Box({-1.0}, {1.0}), Box({-4.0}, {4.0}), c, 3);
  EXPECT_LT(r.overall, 0.05);
  expect_report_invariants(r);
}

TEST(EstimateLc, DeterministicGivenSeed) {
  auto sys = systems::univariate_linear();
  ActionSampler s(sys, 0);
  LcConfig c;
  c.n = 2000;
  c.m = 3;
  c.threads = 2;
  const auto a = estimate_lc(s, sys.spec().domain, sys.spec().successor_domain, c, 17);
  c.threads = 1;
  const auto b = estimate_lc(s, sys.spec().domain, sys.spec().successor_domain, c, 17);
  EXPECT_EQ(a, b);
  const auto d = estimate_lc(s, sys.spec().domain, sys.spec().successor_domain, c, 18);
  EXPECT_NE(a.overall, d.overall);
  EXPECT_EQ(a.grid_resolution, 50u);
  expect_report_invariants(a);
  EXPECT_EQ(to_json(a)["seed"], 17);
}

TEST(EstimateLc, DerivedSuccessorDomain) {
  auto sys = systems::univariate_linear();
  ActionSampler s(sys, 0);
  LcConfig c;
  c.n = 1000;
  c.m = 1;
  const auto r = estimate_lc(s, sys.spec().domain, std::nullopt, c, 1);
  EXPECT_LT(r.y_domain.lo(0), -3.0);
  EXPECT_GT(r.y_domain.hi(0), 3.0);
}

TEST(EstimateLc, BatchOverload) {
  auto sys = systems::univariate_linear();
  std::vector<TransitionSamples> batches;
  for (std::uint64_t k = 0; k < 3; ++k) batches.push_back(generate_samples(sys, 0, sys.spec().domain, 1500, 40 + k));
  LcConfig c;
  const auto r = estimate_lc(batches, sys.spec().domain, sys.spec().successor_domain, c);
  EXPECT_EQ(r.m, 3u);
  EXPECT_EQ(r.n, 1500u);
  EXPECT_EQ(r.seed, 0u);
  expect_report_invariants(r);
  EXPECT_EQ(r, estimate_lc(batches, sys.spec().domain, sys.spec().successor_domain, c));
  batches.push_back(generate_samples(sys, 0, sys.spec().domain, 10, 1));
  EXPECT_THROW(estimate_lc(batches, sys.spec().domain, sys.spec().successor_domain, c), ValidationError);
}

TEST(Compositional, IdentityFactorAndMarginalAgreement) {
  const auto sys = diagonal_system(0.5, 0.0);
  LcConfig c;
  c.n = 20000;
  c.m = 4;
  const std::vector<CompositionalFactor> factors{{0, {0}, Box({-4.38}, {4.24})}, {1, {}, Box({-4.0}, {4.0})}};
  const auto reps = compositional_lc(sys, 0, sys.spec().domain, factors, c, 5);
  ASSERT_EQ(reps.size(), 2u);
  EXPECT_EQ(reps[1].per_dimension.size(), 2u);
  EXPECT_LT(reps[1].overall, 0.05);

  // Factor 0 sees x_0 only and matches the scalar system y = 0.5 x + w.
  auto scalar = systems::univariate_linear();
  const auto one = estimate_lc(ActionSampler(scalar, 0), scalar.spec().domain, Box({-4.38}, {4.24}), c, 6);
  EXPECT_NEAR(reps[0].overall, one.overall, 0.03);
  EXPECT_NEAR(reps[0].overall, 0.5 * normal_pdf(1.0), 0.05);
  for (const auto& r : reps) expect_report_invariants(r);

  const std::vector<CompositionalFactor> bad{{0, {2}, std::nullopt}};
  EXPECT_THROW(compositional_lc(sys, 0, sys.spec().domain, bad, c, 5), ValidationError);
}
