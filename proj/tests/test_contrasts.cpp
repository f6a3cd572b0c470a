#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace jointmct;

namespace {

ContrastMatrix family(ContrastFamily f, std::vector<std::string> levels, std::vector<double> n, bool ordered = false) {
  FamilySpec s;
  s.family = f;
  s.ordered = ordered;
  return build_family(s, levels, n);
}

CellLayout layout(std::size_t A, const std::vector<std::vector<double>>& n_by_b) {
  CellLayout L;
  for (std::size_t a = 0; a < A; ++a) L.a_levels.push_back(std::to_string(a));
  for (std::size_t b = 0; b < n_by_b.size(); ++b) {
    L.b_levels.push_back(std::to_string(b + 1));
    for (double v : n_by_b[b]) L.cell_n.push_back(v);
  }
  return L;
}

CellLayout ibs_layout() {
  return layout(5, {{21, 24, 26, 27, 20}, {50, 54, 49, 45, 53}});
}

}  // namespace

TEST(Contrasts, DunnettRows) {
  auto cm = family(ContrastFamily::dunnett, {"0", "1", "2"}, {3, 3, 3});
  Eigen::MatrixXd want(2, 3);
  want << -1, 1, 0, -1, 0, 1;
  EXPECT_EQ(cm.coef, want);
  EXPECT_EQ(cm.labels, (std::vector<std::string>{"1 - 0", "2 - 0"}));
}

TEST(Contrasts, DunnettCustomControl) {
  FamilySpec s;
  s.control = "2";
  auto cm = build_family(s, {"0", "1", "2"}, std::vector<double>{1, 1, 1});
  EXPECT_EQ(cm.labels[0], "0 - 2");
  EXPECT_EQ(cm.coef(0, 2), -1.0);
  s.control = "9";
  EXPECT_THROW(build_family(s, {"0", "1"}, std::vector<double>{1, 1}), ModelError);
}

TEST(Contrasts, WilliamsBalanced) {
  auto cm = family(ContrastFamily::williams, {"0", "1", "10"}, {5, 5, 5}, true);
  Eigen::MatrixXd want(2, 3);
  want << -1, 0, 1, -1, 0.5, 0.5;
  EXPECT_LE((cm.coef - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(cm.labels, (std::vector<std::string>{"10-0", "(10+1)/2-0"}));
}

// Row m is the n-weighted mean of the top m levels minus control.
TEST(Contrasts, WilliamsSizeWeighting) {
  const std::vector<double> n{4, 2, 2};
  auto cm = family(ContrastFamily::williams, {"0", "1", "10"}, n, true);
  EXPECT_LE((cm.coef.row(1) - Eigen::RowVector3d(-1, 0.5, 0.5)).cwiseAbs().maxCoeff(), 1e-15);

  const std::vector<double> n5{7, 3, 5, 2, 9};
  auto w = family(ContrastFamily::williams, {"a", "b", "c", "d", "e"}, n5, true);
  for (Eigen::Index m = 1; m <= 4; ++m) {
    double total = 0;
    for (Eigen::Index j = 5 - m; j < 5; ++j) total += n5[static_cast<std::size_t>(j)];
    Eigen::RowVectorXd ref = Eigen::RowVectorXd::Zero(5);
    ref(0) = -1;
    for (Eigen::Index j = 5 - m; j < 5; ++j) ref(j) = n5[static_cast<std::size_t>(j)] / total;
    EXPECT_LE((w.coef.row(m - 1) - ref).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Contrasts, WilliamsNeedsOrder) {
  EXPECT_THROW(family(ContrastFamily::williams, {"0", "1"}, {1, 1}, false), ModelError);
  FamilySpec s{ContrastFamily::williams, std::string("1"), true};
  EXPECT_THROW(build_family(s, {"0", "1"}, std::vector<double>{1, 1}), ModelError);
}

TEST(Contrasts, TukeyAndGrandMean) {
  auto t = family(ContrastFamily::tukey, {"a", "b", "c", "d"}, {1, 1, 1, 1});
  EXPECT_EQ(t.rows(), 6);
  EXPECT_EQ(t.labels[0], "b - a");
  auto g = family(ContrastFamily::grand_mean, {"a", "b", "c"}, {2, 3, 5});
  ASSERT_EQ(g.rows(), 3);
  EXPECT_NEAR(g.coef(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(g.coef(0, 1), -0.3, 1e-15);
  EXPECT_NEAR(g.coef(0, 2), -0.5, 1e-15);
}

TEST(Contrasts, FamilyRequiresTwoLevels) {
  EXPECT_THROW(family(ContrastFamily::dunnett, {"0"}, {1}), ModelError);
}

TEST(Contrasts, BuiltInFamiliesAreNormalizedZeroSum) {
  const std::vector<std::string> lv{"0", "1", "2", "3"};
  const std::vector<double> n{5, 3, 8, 4};
  for (auto f : {ContrastFamily::dunnett, ContrastFamily::williams, ContrastFamily::tukey}) {
    auto d = validate(family(f, lv, n, true));
    EXPECT_TRUE(d.ok());
    EXPECT_TRUE(d.unnormalized_rows.empty());
  }
  auto g = validate(family(ContrastFamily::grand_mean, lv, n));
  EXPECT_TRUE(g.nonzero_sum_rows.empty());
}

TEST(Contrasts, JointDunnettOnIbsDesign) {
  auto L = ibs_layout();
  auto proto = build_family({}, L.a_levels, primary_level_sizes(L));
  auto K = expand_joint(proto, L);
  ASSERT_EQ(K.rows(), 12);
  EXPECT_EQ(K.labels.front(), "1:1 - 0");
  EXPECT_EQ(K.labels[7], "2:4 - 0");
  EXPECT_EQ(K.labels[11], "p: 4 - 0");
  EXPECT_NEAR(K.coef(8, 0), -21.0 / 71.0, 1e-15);
  EXPECT_NEAR(K.coef(8, 5), -50.0 / 71.0, 1e-15);
  EXPECT_NEAR(-K.coef(8, 0), 0.29577, 1e-5);
  EXPECT_NEAR(-K.coef(8, 5), 0.70423, 1e-5);
  EXPECT_NEAR(K.coef(11, 4), 20.0 / 73.0, 1e-15);
  auto d = validate(K);
  EXPECT_TRUE(d.ok());
  EXPECT_EQ(d.rank, 9);
  EXPECT_EQ(K.column_names[5], "0.2");
}

TEST(Contrasts, SingleStratumPooledEqualsPerStratum) {
  auto L = layout(4, {{3, 5, 2, 7}});
  auto proto = build_family({}, L.a_levels, primary_level_sizes(L));
  auto K = expand_joint(proto, L);
  ASSERT_EQ(K.rows(), 6);
  EXPECT_EQ(K.coef.topRows(3), K.coef.bottomRows(3));
}

TEST(Contrasts, BalancedStrataGiveEqualWeights) {
  auto L = layout(3, {{4, 4, 4}, {4, 4, 4}, {4, 4, 4}});
  auto K = expand_joint(build_family({}, L.a_levels, primary_level_sizes(L)), L, {false, true});
  for (Eigen::Index c = 0; c < K.cols(); ++c)
    if (K.coef(0, c) != 0.0) EXPECT_NEAR(std::abs(K.coef(0, c)), 1.0 / 3.0, 1e-15);
}

TEST(Contrasts, EmptyCellRejected) {
  auto L = layout(3, {{4, 4, 4}, {4, 0, 4}});
  auto proto = build_family({}, L.a_levels, primary_level_sizes(L));
  EXPECT_THROW(expand_joint(proto, L), ModelError);
  EXPECT_NO_THROW(expand_joint(proto, L, {false, true}));
}

// Zero-sum preservation and the convex-combination identity on random designs.
TEST(Contrasts, PooledRowsAreConvexCombinations) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> sz(1, 30), na(2, 6), nb(1, 4), fam(0, 3);
  for (int rep = 0; rep < 200; ++rep) {
    const auto A = static_cast<std::size_t>(na(rng)), B = static_cast<std::size_t>(nb(rng));
    std::vector<std::vector<double>> n(B);
    for (auto& v : n)
      for (std::size_t a = 0; a < A; ++a) v.push_back(sz(rng));
    auto L = layout(A, n);
    FamilySpec spec{static_cast<ContrastFamily>(fam(rng)), std::nullopt, true};
    auto proto = build_family(spec, L.a_levels, primary_level_sizes(L));
    auto K = expand_joint(proto, L);
    const auto q = proto.rows();
    ASSERT_EQ(K.rows(), static_cast<Eigen::Index>(B + 1) * q);
    EXPECT_TRUE(validate(K).nonzero_sum_rows.empty());
    for (Eigen::Index r = 0; r < q; ++r)
      for (std::size_t a = 0; a < A; ++a) {
        double tot = 0;
        for (std::size_t b = 0; b < B; ++b) tot += L.n(a, b);
        for (std::size_t b = 0; b < B; ++b) {
          const auto c = static_cast<Eigen::Index>(L.cell(a, b));
          const double w = L.n(a, b) / tot;
          const double per = K.coef(static_cast<Eigen::Index>(b) * q + r, c);
          EXPECT_NEAR(K.coef(static_cast<Eigen::Index>(B) * q + r, c), w * per, 1e-15);
        }
      }
  }
}

TEST(Contrasts, ValidateFlagsProblems) {
  ContrastMatrix cm;
  cm.coef.resize(4, 3);
  cm.coef << -1, 1, 0, 0, 0, 0, -1, 1, 0, 1, 1, 0;
  cm.labels = {"a", "b", "c", "d"};
  auto d = validate(cm);
  EXPECT_FALSE(d.ok());
  EXPECT_EQ(d.zero_rows, std::vector<std::size_t>{1});
  ASSERT_EQ(d.duplicate_rows.size(), 1u);
  EXPECT_EQ(d.duplicate_rows[0], (std::pair<std::size_t, std::size_t>{0, 2}));
  EXPECT_EQ(d.nonzero_sum_rows, std::vector<std::size_t>{3});
  EXPECT_EQ(d.rank, 2);
}

TEST(Contrasts, CsvRoundTrip) {
  auto L = ibs_layout();
  auto K = expand_joint(build_family({}, L.a_levels, primary_level_sizes(L)), L);
  std::stringstream io;
  write_contrasts_csv(io, K);
  std::vector<std::string> cells;
  for (std::size_t c = 0; c < L.n_cells(); ++c) cells.push_back(L.cell_name(c));
  auto back = read_contrasts_csv(io, cells, L.b_levels);
  EXPECT_EQ(back.labels, K.labels);
  EXPECT_EQ(back.tags, K.tags);
  EXPECT_LE((back.coef - K.coef).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Contrasts, CsvRejectsUnknownColumn) {
  std::istringstream in("label,0,9\nx,-1,1\n");
  EXPECT_THROW(read_contrasts_csv(in, {"0", "1"}), DataError);
}

TEST(Contrasts, DuplicateLabelsAreSuffixed) {
  auto L = layout(2, {{3, 3}});
  auto proto = build_family({}, L.a_levels, primary_level_sizes(L));
  proto.coef.conservativeResize(2, 2);
  proto.coef.row(1) = proto.coef.row(0);
  proto.labels.push_back(proto.labels[0]);
  proto.tags.push_back(RowTag::pooled());
  auto K = expand_joint(proto, L, {true, false});
  EXPECT_NE(K.labels[0], K.labels[1]);
}
