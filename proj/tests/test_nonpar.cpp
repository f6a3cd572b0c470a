#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace jointmct;
using testsupport::oracle;
using testsupport::vec;

namespace {

RelativeEffect effect(std::vector<double> x, std::vector<double> y) { return relative_effect(x, y); }

ContrastMatrix demo_joint(const LongDataset& ds) {
  return expand_joint(family_for({}, ds.layout()), ds.layout());
}

JointTestOptions greater() {
  JointTestOptions o;
  o.alternative = Alternative::greater;
  return o;
}

}  // namespace

TEST(Nonpar, SmallExamples) {
  EXPECT_DOUBLE_EQ(effect({1, 2, 3}, {1, 2, 3}).estimate, 0.5);
  EXPECT_DOUBLE_EQ(effect({1, 2}, {3, 4}).estimate, 1.0 - 1.0 / 8.0);
  EXPECT_DOUBLE_EQ(effect({3, 4}, {1, 2}).estimate, 1.0 / 8.0);
  auto ties = effect({5, 5}, {5, 5});
  EXPECT_DOUBLE_EQ(ties.estimate, 0.5);
  EXPECT_GT(ties.variance, 0.0);
  EXPECT_THROW(effect({1}, {2, 3}), ModelError);
}

TEST(Nonpar, DirectCountOracle) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> v(0, 6);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(7), y(9);
    for (auto& a : x) a = v(rng);
    for (auto& a : y) a = v(rng) + 1;
    double s = 0;
    for (double a : x)
      for (double b : y) s += (a < b) + 0.5 * (a == b);
    s /= 63.0;
    if (s > 0 && s < 1) EXPECT_NEAR(effect(x, y).estimate, s, 1e-14);
  }
}

TEST(Nonpar, SwapAntisymmetry) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(3 + rep % 5), y(2 + rep % 7);
    for (auto& a : x) a = std::round(3 * z(rng));
    for (auto& a : y) a = std::round(3 * z(rng) + 1);
    auto xy = effect(x, y), yx = effect(y, x);
    EXPECT_DOUBLE_EQ(xy.estimate + yx.estimate, 1.0);
    EXPECT_NEAR(xy.variance, yx.variance, 1e-15);
  }
}

TEST(Nonpar, IdenticalSamplesGiveZeroStatistic) {
  auto ds = testsupport::make_dataset({{{1, 4, 2, 8}, {1, 4, 2, 8}}}, {"0", "1"}, {"all"});
  auto cm = expand_joint(family_for({}, ds.layout()), ds.layout(), {true, false});
  auto fit = fit_relative_effects(ds, cm);
  EXPECT_EQ(fit.transformed(0), 0.0);
}

// Standalone Brunner-Munzel: (p - 1/2) / se matches the reference statistic.
TEST(Nonpar, MatchesBrunnerMunzel) {
  auto ds = testsupport::demo();
  const auto groups = ds.values_by_cell();
  const auto& L = ds.layout();
  const auto& x = groups[L.cell(0, 0)];
  const auto& y = groups[L.cell(2, 0)];
  auto e = relative_effect(x, y);
  EXPECT_NEAR(e.estimate, oracle()["nonpar"]["effect_wt_10_vs_0"].get<double>(), 1e-14);
  const double bm = (e.estimate - 0.5) / std::sqrt(e.variance);
  EXPECT_NEAR(bm, oracle()["nonpar"]["bm_wt_10_vs_0_statistic"].get<double>(), 1e-9);
}

TEST(Nonpar, JointMatchesReference) {
  auto ds = testsupport::demo();
  auto r = run_joint_nonpar(ds, demo_joint(ds), greater());
  const auto& ref = oracle()["nonpar"]["joint_dunnett_greater"];
  const auto eff = vec(ref["effect"]), se = vec(ref["effect_se"]), t = vec(ref["t"]), p = vec(ref["p_adj"]);
  ASSERT_EQ(r.rows.size(), eff.size());
  for (std::size_t i = 0; i < eff.size(); ++i) {
    EXPECT_EQ(r.rows[i].label, ref["labels"][i].get<std::string>());
    EXPECT_NEAR(r.rows[i].estimate, eff[i], 1e-12);
    EXPECT_NEAR(r.rows[i].se, se[i], 1e-12);
    EXPECT_NEAR(r.rows[i].tstat, t[i], 1e-9);
    EXPECT_NEAR(r.rows[i].p_adj, p[i], 1e-3 + r.mc_error);
    EXPECT_GE(r.rows[i].sci_lower, 0.0);
    EXPECT_LE(r.rows[i].sci_lower, r.rows[i].estimate);
    EXPECT_EQ(r.rows[i].sci_upper, 1.0);
  }
  EXPECT_EQ(r.scale, "relative-effect");
  EXPECT_TRUE(std::isinf(r.df_used));
}

TEST(Nonpar, RankInvariance) {
  auto ds = testsupport::demo();
  std::vector<Observation> rows = ds.rows();
  for (auto& o : rows) o.response = std::exp(o.response / 5.0) - 3.0;
  LongDataset warped(ds.a_levels(), ds.b_levels(), rows, true);
  auto cm = demo_joint(ds);
  auto a = run_joint_nonpar(ds, cm, greater());
  auto b = run_joint_nonpar(warped, cm, greater());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].estimate, b.rows[i].estimate);
    EXPECT_EQ(a.rows[i].tstat, b.rows[i].tstat);
    EXPECT_EQ(a.rows[i].p_adj, b.rows[i].p_adj);
  }
}

TEST(Nonpar, CovarianceIsPsd) {
  auto ds = testsupport::demo();
  auto fit = fit_relative_effects(ds, demo_joint(ds));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.vcov_probit);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  for (Eigen::Index i = 0; i < fit.effects.size(); ++i) {
    EXPECT_GT(fit.effects(i), 0.0);
    EXPECT_LT(fit.effects(i), 1.0);
  }
}

TEST(Nonpar, UnsupportedRowsRejected) {
  auto ds = testsupport::demo();
  FamilySpec gm{ContrastFamily::grand_mean, std::nullopt, false};
  auto cm = expand_joint(family_for(gm, ds.layout()), ds.layout());
  EXPECT_THROW(fit_relative_effects(ds, cm), ModelError);
}

// Location shift with large n: parametric and rank-based tests agree in sign and decision.
TEST(Nonpar, AgreesWithParametricOnShiftedNormals) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> z;
  std::vector<std::vector<std::vector<double>>> cells(2);
  const double shift[2][3] = {{0, 0.8, -0.8}, {0, 0.9, 0.0}};
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t a = 0; a < 3; ++a) {
      std::vector<double> v(80);
      for (auto& y : v) y = shift[b][a] + z(rng);
      cells[b].push_back(v);
    }
  auto ds = testsupport::make_dataset(cells, {"0", "1", "2"}, {"m", "f"});
  auto cm = demo_joint(ds);
  JointTestOptions o;
  o.intervals = false;
  o.mvt.precision = 1e-3;
  auto par = run_joint_test(ds, cm, CovarianceKind::model, o);
  auto np = run_joint_nonpar(ds, cm, o);
  for (std::size_t i = 0; i < par.rows.size(); ++i) {
    if (std::abs(par.rows[i].tstat) > 3) EXPECT_EQ(std::signbit(par.rows[i].tstat), std::signbit(np.rows[i].tstat));
    if (par.rows[i].p_adj < 1e-3 || par.rows[i].p_adj > 0.3)
      EXPECT_EQ(par.rows[i].p_adj <= 0.05, np.rows[i].p_adj <= 0.05) << par.rows[i].label;
  }
}
