#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "npv/kde.hpp"

using namespace npv;

namespace {

constexpr KernelFamily kFamilies[] = {KernelFamily::gaussian,     KernelFamily::uniform, KernelFamily::triangle,
                                      KernelFamily::epanechnikov, KernelFamily::quartic, KernelFamily::triweight};

TransitionSamples random_samples(std::size_t n, std::size_t dx, std::size_t dy, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  TransitionSamples s("a", dx, dy);
  std::vector<double> x(dx), y(dy);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = z(rng);
    for (std::size_t k = 0; k < dy; ++k) y[k] = 0.5 * x[k % dx] + z(rng);
    s.add(x, y);
  }
  return s;
}

double gauss_product(std::span<const double> u, std::span<const double> h) {
  double p = 1.0;
  for (std::size_t j = 0; j < u.size(); ++j) p *= normal_pdf(u[j] / h[j]) / h[j];
  return p;
}

// Direct evaluation of the conditional estimator.
double brute_density(const TransitionSamples& s, const KernelSpec& k, std::span<const double> x,
                     std::span<const double> y) {
  double num = 0.0, den = 0.0;
  std::vector<double> ux(s.x_dim()), uy(s.y_dim());
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < ux.size(); ++j) ux[j] = x[j] - s.x(i)[j];
    for (std::size_t j = 0; j < uy.size(); ++j) uy[j] = y[j] - s.y(i)[j];
    const double kx = gauss_product(ux, k.h_x);
    num += kx * gauss_product(uy, k.h_y);
    den += kx;
  }
  return num / den;
}

}  // namespace

TEST(Kernel, CanonicalBandwidthFromMoments) {
  // delta_0 = (R(K) / mu_2(K)^2)^(1/5), integrals by the midpoint rule.
  for (auto f : kFamilies) {
    const double step = 1e-5;
    double mass = 0.0, r = 0.0, mu2 = 0.0;
    for (double u = -10.0 + step / 2; u < 10.0; u += step) {
      const double k = kernel_value(f, u);
      mass += k * step;
      r += k * k * step;
      mu2 += u * u * k * step;
    }
    EXPECT_NEAR(mass, 1.0, 1e-4) << to_string(f);
    // published table values are rounded; triangle is 1.8890 against 24^(1/5) = 1.88818
    EXPECT_NEAR(canonical_bandwidth(f), std::pow(r / (mu2 * mu2), 0.2), 1e-3) << to_string(f);
  }
  EXPECT_DOUBLE_EQ(canonical_bandwidth(KernelFamily::gaussian), 0.7764);
  EXPECT_NEAR(equivalent_bandwidth(2.0, KernelFamily::gaussian, KernelFamily::uniform), 2.0 * 1.3510 / 0.7764, 1e-12);
  EXPECT_THROW(equivalent_bandwidth(0.0, KernelFamily::gaussian, KernelFamily::uniform), ValidationError);
}

TEST(Kernel, FamilyNamesRoundTrip) {
  for (auto f : kFamilies) EXPECT_EQ(kernel_family_from_string(to_string(f)), f);
  EXPECT_THROW(kernel_family_from_string("cosine"), ValidationError);
}

TEST(Kernel, ProductValues) {
  const std::vector<double> u{0.0, 0.0}, h{1.0, 2.0};
  EXPECT_NEAR(kernel_product(u, h), kInvSqrt2Pi * kInvSqrt2Pi / 2.0, 1e-16);
  const std::vector<double> u2{0.5, -1.0};
  EXPECT_NEAR(kernel_product(u2, h, KernelFamily::epanechnikov), 0.75 * (1.0 - 0.25) * 0.75 * (1.0 - 0.25) / 2.0, 1e-15);
  EXPECT_EQ(kernel_product(std::vector<double>{1.5}, std::vector<double>{1.0}, KernelFamily::uniform), 0.0);
  EXPECT_THROW(kernel_product(u, std::vector<double>{1.0, 0.0}), ValidationError);
}

TEST(Estimator, WeightsSumToOne) {
  Rng rng(1);
  std::uniform_real_distribution<double> uh(0.1, 2.0), ux(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + trial % 3;
    KernelSpec k{KernelFamily::gaussian, std::vector<double>(d), std::vector<double>(d)};
    for (auto& h : k.h_x) h = uh(rng);
    for (auto& h : k.h_y) h = uh(rng);
    CondDensityEstimator est(random_samples(50, d, d, trial), k);
    std::vector<double> x(d);
    for (auto& v : x) v = ux(rng);
    const auto w = est.weights(x);
    EXPECT_NEAR(pairwise_sum(w), 1.0, 1e-12);
    for (double v : w) EXPECT_GE(v, 0.0);
  }
}

TEST(Estimator, DensityMatchesDirectSum) {
  const auto s = random_samples(40, 2, 2, 5);
  const KernelSpec k{KernelFamily::gaussian, {0.7, 0.9}, {0.5, 1.1}};
  CondDensityEstimator est(s, k);
  Rng rng(2);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int t = 0; t < 25; ++t) {
    const std::vector<double> x{u(rng), u(rng)}, y{u(rng), u(rng)};
    const double want = brute_density(s, k, x, y);
    EXPECT_NEAR(est.density(x, y), want, 1e-12 * std::max(1.0, want));
  }
}

TEST(Estimator, PartialMatchesCentralDifference) {
  const auto s = random_samples(30, 2, 1, 9);
  const KernelSpec k{KernelFamily::gaussian, {0.6, 0.8}, {0.7}};
  CondDensityEstimator est(s, k);
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    std::vector<double> x{u(rng), u(rng)};
    const std::vector<double> y{u(rng)};
    for (std::size_t j = 0; j < 2; ++j) {
      const double step = 1e-5, x0 = x[j];
      x[j] = x0 + step;
      const double fp = brute_density(s, k, x, y);
      x[j] = x0 - step;
      const double fm = brute_density(s, k, x, y);
      x[j] = x0;
      const double fd = (fp - fm) / (2 * step);
      EXPECT_NEAR(est.partial(x, y, j), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Estimator, SingleSampleCellIntegral) {
  TransitionSamples s("a", 1, 1);
  s.add(std::vector<double>{0.0}, std::vector<double>{1.0});
  CondDensityEstimator est(s, KernelSpec{KernelFamily::gaussian, {1.0}, {1.0}});
  for (double x : {-3.0, 0.0, 2.5}) {
    const std::vector<double> q{x};
    EXPECT_NEAR(est.cell_integral(q, Box({0.0}, {1.0})), 0.341344746068543, 1e-12);
    EXPECT_NEAR(est.cell_integral(q, Box({1.0}, {2.0})), 0.341344746068543, 1e-12);
    EXPECT_NEAR(est.cell_integral(q, Box({-INFINITY}, {INFINITY})), 1.0, 1e-15);
  }
}

TEST(Estimator, CellIntegralMatchesWeightedMasses) {
  const auto s = random_samples(20, 1, 2, 4);
  const KernelSpec k{KernelFamily::gaussian, {0.5}, {0.3, 0.6}};
  CondDensityEstimator est(s, k);
  const std::vector<double> x{0.2};
  const Box cell({-0.5, 0.0}, {0.5, 1.0});
  const auto w = est.weights(x);
  double want = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double m = w[i];
    for (std::size_t j = 0; j < 2; ++j)
      m *= normal_mass((cell.lo(j) - s.y(i)[j]) / k.h_y[j], (cell.hi(j) - s.y(i)[j]) / k.h_y[j]);
    want += m;
  }
  EXPECT_NEAR(est.cell_integral(x, cell), want, 1e-14);
}

TEST(Estimator, DenominatorUnderflowNamesThePoint) {
  TransitionSamples s("a", 1, 1);
  s.add(std::vector<double>{0.0}, std::vector<double>{0.0});
  CondDensityEstimator est(s, KernelSpec{KernelFamily::gaussian, {0.01}, {1.0}});
  try {
    est.density(std::vector<double>{100.0}, std::vector<double>{0.0});
    FAIL() << "expected DenominatorUnderflow";
  } catch (const DenominatorUnderflow& e) {
    EXPECT_EQ(e.point(), std::vector<double>{100.0});
    EXPECT_EQ(e.weight_sum(), 0.0);
  }
}

TEST(Estimator, ClosedFormsNeedGaussian) {
  const auto s = random_samples(10, 1, 1, 1);
  CondDensityEstimator est(s, KernelSpec{KernelFamily::epanechnikov, {5.0}, {5.0}});
  const std::vector<double> x{0.0}, y{0.0};
  EXPECT_GT(est.density(x, y), 0.0);
  EXPECT_THROW(est.partial(x, y, 0), ValidationError);
  EXPECT_THROW(est.cell_integral(x, Box({0.0}, {1.0})), ValidationError);
  EXPECT_THROW(CondDensityEstimator(s, KernelSpec{KernelFamily::gaussian, {1.0, 1.0}, {1.0}}), ValidationError);
}

TEST(Bandwidth, TheoreticalRule) {
  EXPECT_DOUBLE_EQ(theoretical_bandwidth(60000, 1), std::pow(60000.0, -1.0 / 8.0));
  EXPECT_DOUBLE_EQ(theoretical_bandwidth(60000, 2), std::pow(60000.0, -1.0 / 10.0));
  EXPECT_DOUBLE_EQ(theoretical_bandwidth(60000, 7, 1), std::pow(60000.0, -1.0 / 14.0));
  EXPECT_NEAR(theoretical_bandwidth(60000, 1), 0.25277, 1e-5);
  EXPECT_THROW(theoretical_bandwidth(1, 1), ValidationError);
}

TEST(Bandwidth, ScottRule) {
  // sigma = sqrt(1.25) (divisor n), 4^(-1/5) sqrt(1.25) = 0.84732.
  const std::vector<double> data{0.0, 1.0, 2.0, 3.0};
  EXPECT_NEAR(scott_bandwidth(data, 1)[0], std::pow(4.0, -0.2) * std::sqrt(1.25), 1e-15);
  EXPECT_NEAR(scott_bandwidth(data, 1)[0], 0.8473, 1e-4);
  const std::vector<double> two{0.0, 5.0, 1.0, 5.0, 2.0, 5.0};
  EXPECT_THROW(scott_bandwidth(two, 2), ValidationError);
}

TEST(Bandwidth, CrossValidationMatchesDirectSum) {
  Rng rng(8);
  std::normal_distribution<double> z;
  const std::size_t n = 30, d = 2;
  std::vector<double> data(n * d);
  for (auto& v : data) v = z(rng);
  const std::vector<double> h{0.4, 0.7};
  const double det = h[0] * h[1];
  double conv = 0.0, loo = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double kk = 1.0, k = 1.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double u = (data[j * d + c] - data[i * d + c]) / h[c];
        kk *= normal_pdf(u / std::sqrt(2.0)) / std::sqrt(2.0);
        k *= normal_pdf(u);
      }
      conv += kk;
      if (i != j) loo += k;
    }
  const double want = conv / (n * n * det) - 2.0 * loo / (n * (n - 1.0) * det);
  EXPECT_NEAR(cv_objective(data, d, h), want, 1e-12 * std::abs(want));

  const std::vector<double> cands{0.05, 0.2, 0.5, 1.0, 3.0};
  const double best = cv_grid_search(data, d, cands);
  for (double c : cands) {
    const std::vector<double> hc(d, c), hb(d, best);
    EXPECT_LE(cv_objective(data, d, hb), cv_objective(data, d, hc));
  }
}
