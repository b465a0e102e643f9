#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "npv/abstraction.hpp"

using namespace npv;

namespace {

const Box kD({0.0, 0.0}, {0.8, 0.4});
const Box kO({1.2, 1.6}, {2.0, 2.0});

GridPartition case_grid(double delta) {
  return GridPartition(Box::cube(2, 0.0, 2.0), {delta, delta}, {{"D", {kD}}, {"O", {kO}}});
}

double find(const std::vector<ImdpEntry>& row, std::size_t col, bool upper = true) {
  for (const auto& e : row)
    if (e.col == col) return upper ? e.up : e.lo;
  return 0.0;
}

BuiltinSystem constant_successor_1d() {
  SystemSpec spec{1, {"a"}, Box({-3.0}, {3.0}), Box({-3.0}, {3.0})};
  return BuiltinSystem(SystemKind::linear_gaussian, spec,
                       LinearGaussianParams{{Eigen::MatrixXd::Zero(1, 1)}, Eigen::VectorXd::Zero(1),
                                            Eigen::MatrixXd::Identity(1, 1)});
}

}  // namespace

TEST(Grid, CountsAndLabels) {
  const auto g = case_grid(0.4);
  EXPECT_EQ(g.num_cells(), 25u);
  EXPECT_EQ(g.num_states(), 26u);
  EXPECT_EQ(case_grid(0.1).num_cells(), 400u);
  std::vector<std::size_t> d_cells;
  for (std::size_t s = 0; s < g.num_cells(); ++s)
    if (g.has_label(s, "D")) d_cells.push_back(s);
  ASSERT_EQ(d_cells, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(g.cell(0), Box({0.0, 0.0}, {0.4, 0.4}));
  EXPECT_EQ(g.cell(1), Box({0.4, 0.0}, {0.8, 0.4}));
  EXPECT_EQ(g.labels(g.sink()), std::vector<std::string>{kOutLabel});
  EXPECT_TRUE(g.warnings().empty());
  // O u D: 0.8 x 0.4 + 0.8 x 0.4
  EXPECT_NEAR(g.labeled_measure(), 0.64, 1e-12);
}

TEST(Grid, TilingAndLocate) {
  const auto g = case_grid(0.4);
  double vol = 0.0;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    const auto box = g.cell(c);
    vol += box.volume();
    EXPECT_TRUE(box.contains(g.representative(c)));
    EXPECT_EQ(g.locate(g.representative(c)), c);
    EXPECT_EQ(g.cell_index(g.cell_digits(c)), c);
    for (std::size_t o = 0; o < c; ++o) EXPECT_FALSE(box.overlaps(g.cell(o)));
  }
  EXPECT_NEAR(vol, 4.0, 1e-12);
  EXPECT_EQ(g.locate(std::vector<double>{2.0, 2.0}), 24u);
  EXPECT_EQ(g.locate(std::vector<double>{2.01, 0.0}), std::nullopt);
  EXPECT_EQ(g.locate(std::vector<double>{-1e-9, 0.0}), std::nullopt);
}

TEST(Grid, Errors) {
  EXPECT_THROW(GridPartition(Box::cube(2, 0.0, 2.0), {0.3, 0.3}), ValidationError);
  EXPECT_THROW(GridPartition(Box::cube(2, 0.0, 2.0), {0.4, 0.4, 0.4}), ValidationError);
  EXPECT_THROW(GridPartition(Box::cube(2, 0.0, 2.0), {0.4, 0.4}, {{"out", {kD}}}), ValidationError);
  const GridPartition partial(Box::cube(2, 0.0, 2.0), {0.4, 0.4}, {{"P", {Box({0.0, 0.0}, {0.5, 0.4})}}});
  EXPECT_FALSE(partial.warnings().empty());
  EXPECT_TRUE(partial.has_label(0, "P"));
  EXPECT_FALSE(partial.has_label(1, "P"));
}

TEST(Chebyshev, SampleSizes) {
  EXPECT_EQ(chebyshev_sample_size(0.1, 0.1), 250u);
  EXPECT_EQ(chebyshev_sample_size(0.5, 0.5), 2u);
  EXPECT_EQ(chebyshev_sample_size(1.0, 0.999999), 1u);
  EXPECT_EQ(chebyshev_sample_size(1.0 / 750.0, 0.05), 2'812'500u);
  EXPECT_THROW(chebyshev_sample_size(0.0, 0.1), ValidationError);
  EXPECT_THROW(chebyshev_sample_size(0.1, 1.0), ValidationError);
  EXPECT_NEAR(eps_bar_from_global(0.2, 3, 25), 1.0 / 750.0, 1e-18);
  EXPECT_NEAR(eps_bar_from_global(0.2, 3, 400), 8.333e-5, 1e-8);
  EXPECT_DOUBLE_EQ(eps_bar_from_global(0.5, 1, 1), 0.25);
  EXPECT_THROW(eps_bar_from_global(0.2, 0, 25), ValidationError);
}

TEST(Empirical, BudgetGuardReportsRequiredN) {
  // 2 actions x 25 cells x 2,812,500 draws is above the 1e8 total budget.
  auto sys = systems::case_study_switched();
  EmpiricalConfig c;
  c.eps_bar = 1.0 / 750.0;
  c.beta_bar = 0.05;
  try {
    empirical_imdp(sys, case_grid(0.4), c, 1);
    FAIL() << "expected BudgetError";
  } catch (const BudgetError& e) {
    EXPECT_NE(std::string(e.what()).find("2812500"), std::string::npos) << e.what();
  }
  c.row_budget = 1'000'000;
  EXPECT_THROW(empirical_imdp(systems::case_study_linear(), case_grid(0.4), c, 1), BudgetError);
}

TEST(Empirical, PointMassRow) {
  auto sys = systems::case_study_linear();
  sys.set_zero_noise(true);
  const auto g = case_grid(0.4);
  EmpiricalConfig c;
  const auto m = empirical_imdp(sys, g, c, 3);
  // centre (0.2, 0.2) maps to (0.1, 0.1), still cell 0
  const auto& row = m.row(0, 0);
  EXPECT_DOUBLE_EQ(find(row, 0, false), 0.9);
  EXPECT_DOUBLE_EQ(find(row, 0, true), 1.0);
  for (const auto& e : row)
    if (e.col != 0) {
      EXPECT_EQ(e.lo, 0.0);
      EXPECT_DOUBLE_EQ(e.up, 0.1);
    }
  EXPECT_EQ(m.provenance["method"], "empirical");
}

TEST(Empirical, ConvergesToModelBased) {
  auto sys = systems::case_study_linear();
  const auto g = case_grid(0.4);
  const auto mb = model_based_mdp(sys, g);
  double worst = 0.0;
  for (std::size_t c = 0; c < g.num_cells(); c += 3) {
    const auto row = empirical_row(sys, g, c, 0, 100000, 0.0, derive_seed(11, {c}));
    for (const auto& e : row) worst = std::max(worst, std::abs(e.lo - find(mb.row(0, c), e.col)));
  }
  EXPECT_LT(worst, 0.02);
}

TEST(ModelBased, ConstantSuccessorRows) {
  const auto sys = constant_successor_1d();
  const GridPartition g(Box({-3.0}, {3.0}), {2.0});
  const auto m = model_based_mdp(sys, g);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(find(m.row(0, c), 1), 0.682689492137086, 1e-14);
    double sum = 0.0;
    for (const auto& e : m.row(0, c)) {
      EXPECT_EQ(e.lo, e.up);
      sum += e.up;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(ModelBased, CaseStudyRowsSumToOne) {
  const auto g = case_grid(0.4);
  const auto m = model_based_mdp(systems::case_study_switched(), g);
  EXPECT_EQ(m.num_states, 26u);
  EXPECT_EQ(m.num_actions(), 2u);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      double sum = 0.0;
      for (const auto& e : m.row(a, c)) sum += e.up;
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  // among grid cells, the corner row puts most mass on the corner cell (A q = (0.1, 0.1))
  auto row = m.row(0, 0);
  row.pop_back();
  const auto best = std::max_element(row.begin(), row.end(), [](auto& x, auto& y) { return x.up < y.up; });
  EXPECT_EQ(best->col, 0u);
  // sink absorbing
  ASSERT_EQ(m.row(0, 25).size(), 1u);
  EXPECT_EQ(m.row(0, 25)[0], (ImdpEntry{25, 1.0, 1.0}));
}

TEST(Npe, SingleSampleTwoCells) {
  TransitionSamples s("a", 1, 1);
  s.add(std::vector<double>{0.5}, std::vector<double>{1.0});
  const std::vector<CondDensityEstimator> est{CondDensityEstimator(s, KernelSpec{KernelFamily::gaussian, {1.0}, {1.0}})};
  const GridPartition g(Box({0.0}, {2.0}), {1.0});
  const auto m = npe_imdp(est, {"a"}, g);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_NEAR(find(m.row(0, c), 0, false), 0.341344746068543, 1e-12);
    EXPECT_NEAR(find(m.row(0, c), 1, true), 0.341344746068543, 1e-12);
    EXPECT_NEAR(find(m.row(0, c), 2, true), 1.0 - 0.682689492137086, 1e-12);
  }
}

TEST(Npe, DegenerateAndNestedGrids) {
  auto sys = systems::case_study_linear();
  const auto s = generate_samples(sys, 0, sys.spec().domain, 500, 8);
  const std::vector<CondDensityEstimator> est{CondDensityEstimator(s, KernelSpec{KernelFamily::gaussian, {0.5, 0.5}, {0.5, 0.5}})};
  const auto g = case_grid(0.4);
  const auto m1 = npe_imdp(est, {"a"}, g, NpeConfig{1, 0});
  for (std::size_t c = 0; c < g.num_cells(); ++c)
    for (const auto& e : m1.row(0, c)) {
      if (e.col != g.sink()) {
        EXPECT_EQ(e.lo, e.up);
      }
    }
  const auto m3 = npe_imdp(est, {"a"}, g, NpeConfig{3, 0});
  const auto m5 = npe_imdp(est, {"a"}, g, NpeConfig{5, 0});
  for (std::size_t c = 0; c < g.num_cells(); ++c)
    for (const auto& e : m3.row(0, c)) {
      if (e.col == g.sink()) continue;
      EXPECT_GE(find(m5.row(0, c), e.col, true) - find(m5.row(0, c), e.col, false), e.up - e.lo - 1e-12);
    }
  const std::vector<CondDensityEstimator> flat{CondDensityEstimator(s, KernelSpec{KernelFamily::uniform, {0.5, 0.5}, {0.5, 0.5}})};
  EXPECT_THROW(npe_imdp(flat, {"a"}, g), ValidationError);
}

TEST(ImdpFile, RoundTripAndValidation) {
  const auto g = case_grid(0.4);
  auto sys = systems::case_study_switched();
  const auto s = generate_samples(sys, 0, sys.spec().domain, 200, 2);
  const std::vector<CondDensityEstimator> est{CondDensityEstimator(s, KernelSpec{KernelFamily::gaussian, {0.4, 0.4}, {0.4, 0.4}}),
                                              CondDensityEstimator(s, KernelSpec{KernelFamily::gaussian, {0.6, 0.6}, {0.3, 0.3}})};
  const auto m = npe_imdp(est, {"a1", "a2"}, g);
  std::stringstream ss;
  write_imdp(m, ss);
  const auto back = read_imdp(ss);
  EXPECT_EQ(back, m);

  std::istringstream junk("npv-imdp 1\nstates x\n");
  EXPECT_THROW(read_imdp(junk), ValidationError);

  Imdp bad(2, {"a"});
  bad.rows[0][0] = {{0, 0.7, 0.8}, {1, 0.5, 0.6}};
  bad.rows[0][1] = {{1, 1.0, 1.0}};
  EXPECT_THROW(bad.validate(), ValidationError);
  bad.rows[0][0] = {{0, 0.3, 0.8}, {1, 0.2, 0.6}};
  EXPECT_NO_THROW(bad.validate());
  bad.rows[0][0] = {{0, 0.5, 0.4}, {1, 0.5, 0.6}};
  EXPECT_THROW(bad.validate(), ValidationError);
}
