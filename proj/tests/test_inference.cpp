#include <gtest/gtest.h>

#include "support.hpp"

using namespace jointmct;
using testsupport::oracle;
using testsupport::vec;

namespace {

ContrastMatrix demo_joint(const LongDataset& ds) {
  auto proto = family_for({}, ds.layout());
  return expand_joint(proto, ds.layout());
}

JointTestOptions options(Alternative alt) {
  JointTestOptions o;
  o.alternative = alt;
  return o;
}

void expect_matches(const JointResult& r, const nlohmann::json& ref, double p_tol, double tol = 1e-9) {
  const auto est = vec(ref["estimate"]), se = vec(ref["se"]), t = vec(ref["t"]), p = vec(ref["p_adj"]);
  ASSERT_EQ(r.rows.size(), est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    EXPECT_NEAR(r.rows[i].estimate, est[i], tol) << i;
    EXPECT_NEAR(r.rows[i].se, se[i], tol) << i;
    EXPECT_NEAR(r.rows[i].tstat, t[i], tol) << i;
    // reference p from 4e6 plain draws: se <= 2.5e-4
    EXPECT_NEAR(r.rows[i].p_adj, std::max(p[i], kMinReportedP), p_tol + r.mc_error) << i;
  }
  if (ref.contains("labels"))
    for (std::size_t i = 0; i < est.size(); ++i) EXPECT_EQ(r.rows[i].label, ref["labels"][i].get<std::string>());
  if (ref.contains("p_raw")) {
    const auto raw = vec(ref["p_raw"]);
    for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_NEAR(r.rows[i].p_raw, raw[i], 1e-10);
  }
  if (ref.contains("critical_value")) EXPECT_NEAR(r.critical_value, ref["critical_value"].get<double>(), 5e-3);
}

}  // namespace

TEST(Inference, JointDunnettGreaterModel) {
  auto ds = testsupport::demo();
  auto r = run_joint_test(ds, demo_joint(ds), CovarianceKind::model, options(Alternative::greater));
  expect_matches(r, oracle()["gaussian"]["joint_dunnett_model_greater"], 1e-3);
  EXPECT_EQ(r.df_used, 31.0);
  EXPECT_EQ(r.covariance_kind, "model");
}

TEST(Inference, JointDunnettTwoSidedSandwich) {
  auto ds = testsupport::demo();
  auto r = run_joint_test(ds, demo_joint(ds), CovarianceKind::hc0, options(Alternative::two_sided));
  expect_matches(r, oracle()["gaussian"]["joint_dunnett_hc0_two_sided"], 1e-3);
  EXPECT_EQ(r.df_used, 31.0);
}

TEST(Inference, JointDunnettLess) {
  auto ds = testsupport::demo();
  auto r = run_joint_test(ds, demo_joint(ds), CovarianceKind::model, options(Alternative::less));
  expect_matches(r, oracle()["gaussian"]["joint_dunnett_model_less"], 1e-3);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(std::isinf(row.sci_lower));
    EXPECT_LT(row.sci_upper, kInf);
  }
}

TEST(Inference, SeparateStratum) {
  auto ds = testsupport::demo();
  auto r = run_separate_test(ds, "wt", {}, CovarianceKind::model, options(Alternative::greater));
  expect_matches(r, oracle()["gaussian"]["separate_wt_greater"], 1e-3);
  EXPECT_EQ(r.df_used, 15.0);
  EXPECT_EQ(r.title, "separate: wt alone");
}

TEST(Inference, WilliamsSeparate) {
  auto ds = testsupport::demo();
  FamilySpec spec{ContrastFamily::williams, std::nullopt, true};
  JointTestOptions o = options(Alternative::greater);
  o.intervals = false;
  auto r = run_separate_test(ds, "wt", spec, CovarianceKind::model, o);
  const auto& ref = oracle()["gaussian"]["williams_wt"];
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].label, "wt:10-0");
  EXPECT_EQ(r.rows[1].label, "wt:(10+1)/2-0");
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(r.rows[i].estimate, vec(ref["estimate"])[i], 1e-9);
    EXPECT_NEAR(r.rows[i].se, vec(ref["se"])[i], 1e-9);
  }
}

TEST(Inference, AdditivePooledAnalysis) {
  auto ds = testsupport::demo();
  auto proto = family_for({}, ds.layout());
  auto r = run_additive_test(ds, proto, CovarianceKind::model, options(Alternative::greater));
  expect_matches(r, oracle()["gaussian"]["additive_dunnett_greater"], 1e-3);
  EXPECT_EQ(r.df_used, 33.0);
  auto h = run_additive_test(ds, proto, CovarianceKind::hc0, options(Alternative::greater));
  const auto se = vec(oracle()["gaussian"]["additive_hc0_se"]);
  for (std::size_t i = 0; i < se.size(); ++i) EXPECT_NEAR(h.rows[i].se, se[i], 1e-9);
}

TEST(Inference, InteractionF) {
  auto ds = testsupport::demo();
  auto f = interaction_f_test(ds);
  const auto& g = oracle()["gaussian"];
  EXPECT_NEAR(f.F, g["interaction_F"].get<double>(), 1e-10);
  EXPECT_NEAR(f.p, g["interaction_p"].get<double>(), 1e-10);
  EXPECT_EQ(f.df1, 2.0);
  EXPECT_EQ(f.df2, 31.0);
  EXPECT_THROW(interaction_f_test(ds.restrict_to_stratum(0)), ModelError);
}

// Additive data with small noise: the F test p-value is roughly uniform.
TEST(Inference, InteractionFUniformUnderNull) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  const int reps = 400;
  int below = 0, below_half = 0;
  for (int r = 0; r < reps; ++r) {
    std::vector<std::vector<std::vector<double>>> cells(2);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t a = 0; a < 3; ++a) {
        std::vector<double> v(6);
        for (auto& y : v) y = 2.0 * static_cast<double>(a) + 5.0 * static_cast<double>(b) + 1e-3 * z(rng);
        cells[b].push_back(v);
      }
    auto p = interaction_f_test(testsupport::make_dataset(cells, {"0", "1", "2"}, {"m", "f"})).p;
    below += p <= 0.1;
    below_half += p <= 0.5;
  }
  // binomial 99.9% bands
  EXPECT_NEAR(below / double(reps), 0.1, 3.3 * std::sqrt(0.09 / reps));
  EXPECT_NEAR(below_half / double(reps), 0.5, 3.3 * std::sqrt(0.25 / reps));
}

TEST(Inference, SingleContrastCollapsesToTTest) {
  auto ds = testsupport::make_dataset({{{1.1, 2.3, 2.9, 3.5}, {4.2, 6.1, 5.0}}}, {"0", "1"}, {"all"});
  auto cm = expand_joint(family_for({}, ds.layout()), ds.layout(), {true, false});
  for (auto alt : {Alternative::greater, Alternative::less, Alternative::two_sided}) {
    auto r = run_joint_test(ds, cm, CovarianceKind::model, options(alt));
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_NEAR(r.rows[0].p_adj, r.rows[0].p_raw, 1e-12);
    EXPECT_NEAR(r.critical_value, alt == Alternative::two_sided ? t_quantile(0.975, 5) : t_quantile(0.95, 5), 1e-10);
  }
  // pooled two-sample t statistic
  const double m0 = 9.8 / 4, m1 = 15.3 / 3;
  double ss = 0;
  for (double y : {1.1, 2.3, 2.9, 3.5}) ss += (y - m0) * (y - m0);
  for (double y : {4.2, 6.1, 5.0}) ss += (y - m1) * (y - m1);
  const double t = (m1 - m0) / std::sqrt(ss / 5 * (1.0 / 4 + 1.0 / 3));
  auto r = run_joint_test(ds, cm, CovarianceKind::model, options(Alternative::two_sided));
  EXPECT_NEAR(r.rows[0].tstat, t, 1e-12);
}

TEST(Inference, ResultInvariants) {
  auto ds = testsupport::demo();
  for (auto kind : {CovarianceKind::model, CovarianceKind::hc3})
    for (auto alt : {Alternative::greater, Alternative::two_sided}) {
      auto r = run_joint_test(ds, demo_joint(ds), kind, options(alt));
      for (Eigen::Index i = 0; i < r.corr_used.rows(); ++i) EXPECT_EQ(r.corr_used(i, i), 1.0);
      for (const auto& row : r.rows) {
        EXPECT_GT(row.se, 0.0);
        EXPECT_EQ(std::signbit(row.tstat), std::signbit(row.estimate));
        EXPECT_GE(row.p_adj, row.p_raw - r.mc_error);
        // p_adj <= alpha exactly when the interval excludes 0, unless within MC error of alpha
        const bool excludes = row.sci_lower > 0.0 || row.sci_upper < 0.0;
        if (std::abs(row.p_adj - r.alpha) > 2 * r.mc_error) EXPECT_EQ(row.p_adj <= r.alpha, excludes) << row.label;
        if (alt == Alternative::greater) {
          EXPECT_NEAR(row.sci_lower, row.estimate - r.critical_value * row.se, 1e-12);
          EXPECT_TRUE(std::isinf(row.sci_upper));
        } else {
          EXPECT_NEAR(row.sci_upper - row.estimate, row.estimate - row.sci_lower, 1e-9);
        }
      }
    }
}

TEST(Inference, ScaleEquivariance) {
  auto ds = testsupport::demo();
  auto cm = demo_joint(ds);
  auto a = run_joint_test(ds, cm, CovarianceKind::model, options(Alternative::two_sided));
  auto b = run_joint_test(ds.scaled(4.0), cm, CovarianceKind::model, options(Alternative::two_sided));
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_NEAR(b.rows[i].estimate, 4.0 * a.rows[i].estimate, 1e-12 * std::abs(b.rows[i].estimate) + 1e-12);
    EXPECT_NEAR(b.rows[i].tstat, a.rows[i].tstat, 1e-12);
    EXPECT_NEAR(b.rows[i].p_adj, a.rows[i].p_adj, 2 * a.mc_error);
    EXPECT_NEAR(b.rows[i].sci_upper - b.rows[i].sci_lower, 4.0 * (a.rows[i].sci_upper - a.rows[i].sci_lower), 1e-9);
  }
}

TEST(Inference, PooledEstimateIsWeightedStrata) {
  auto ds = testsupport::demo();
  auto r = run_joint_test(ds, demo_joint(ds), CovarianceKind::model, options(Alternative::greater));
  const auto& L = ds.layout();
  const auto beta = fit_gaussian_cell_means(ds).beta;
  for (std::size_t a = 1; a < 3; ++a) {
    double pooled = 0;
    for (std::size_t lvl : {a, std::size_t{0}}) {
      const double sign = lvl == 0 ? -1.0 : 1.0;
      const double tot = L.n(lvl, 0) + L.n(lvl, 1);
      for (std::size_t b = 0; b < 2; ++b) pooled += sign * L.n(lvl, b) / tot * beta(static_cast<Eigen::Index>(L.cell(lvl, b)));
    }
    EXPECT_NEAR(r.rows[3 + a].estimate, pooled, 1e-12);
  }
}

TEST(Inference, BinomialJoint) {
  auto ds = load_binomial_fixture("demo_binomial");
  auto fit = fit_binomial_logit(ds, true);
  auto cm = expand_joint(family_for({}, ds.layout()), ds.layout());
  auto r = run_joint_test(fit, fit.vcov_model, cm, options(Alternative::less));
  // reference comes from iterated IRLS, converged to about 1e-7
  expect_matches(r, oracle()["binomial"]["joint_dunnett_less"], 1e-3, 1e-6);
  EXPECT_TRUE(std::isinf(r.df_used));
  EXPECT_EQ(r.scale, "log-odds");

  // no boundary cell after collapsing, so auto mode fits the plain logit
  auto g = run_global_test(ds, {}, std::nullopt, options(Alternative::less));
  const auto& ref = oracle()["binomial"]["global_less"];
  ASSERT_EQ(g.rows.size(), 2u);
  EXPECT_EQ(g.rows[0].label, "g: Aspirin - Control");
  EXPECT_EQ(g.rows[0].tag, RowTag::global());
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(g.rows[i].estimate, vec(ref["estimate"])[i], 1e-6);
    EXPECT_NEAR(g.rows[i].se, vec(ref["se"])[i], 1e-6);
  }
}

TEST(Inference, GlobalGaussianUsesCollapsedFit) {
  auto ds = testsupport::demo();
  auto g = run_global_test(ds, {}, CovarianceKind::model, options(Alternative::greater));
  auto flat = fit_gaussian_cell_means(ds.collapse_strata());
  EXPECT_NEAR(g.rows[1].estimate, flat.beta(2) - flat.beta(0), 1e-12);
  EXPECT_EQ(g.df_used, 37.0 - 3.0);
}

TEST(Inference, Errors) {
  auto ds = testsupport::demo();
  auto cm = demo_joint(ds);
  JointTestOptions bad;
  bad.alpha = 1.5;
  EXPECT_THROW(run_joint_test(ds, cm, CovarianceKind::model, bad), ModelError);
  ContrastMatrix narrow = cm;
  narrow.coef.conservativeResize(Eigen::NoChange, 4);
  EXPECT_THROW(run_joint_test(ds, narrow, CovarianceKind::model, {}), ModelError);
  ContrastMatrix zero = cm;
  zero.coef.row(0).setZero();
  EXPECT_THROW(run_joint_test(ds, zero, CovarianceKind::model, {}), ModelError);
  EXPECT_THROW(run_separate_test(ds, "nope", {}, CovarianceKind::model, {}), DataError);
}

TEST(Inference, SeedDeterminism) {
  auto ds = testsupport::demo();
  auto cm = demo_joint(ds);
  auto o = options(Alternative::greater);
  o.mvt.precision = 1e-3;
  auto a = run_joint_test(ds, cm, CovarianceKind::model, o);
  auto b = run_joint_test(ds, cm, CovarianceKind::model, o);
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].p_adj, b.rows[i].p_adj);
  EXPECT_EQ(a.critical_value, b.critical_value);
}
