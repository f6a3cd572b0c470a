#pragma once

// Single-step joint multiple contrast tests: estimates K beta, covariance
// K V K', max-t adjusted p-values over all rows and compatible simultaneous
// confidence intervals.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jointmct/contrasts.hpp"
#include "jointmct/dataset.hpp"
#include "jointmct/distributions.hpp"
#include "jointmct/error.hpp"
#include "jointmct/models.hpp"
#include "jointmct/mvt.hpp"
#include "jointmct/ols.hpp"

namespace jointmct {

enum class CovarianceKind { model, hc0, hc1, hc3 };

inline CovarianceKind parse_covariance(const std::string& s) {
  if (s == "model") return CovarianceKind::model;
  if (s == "hc0" || s == "HC0" || s == "sandwich") return CovarianceKind::hc0;
  if (s == "hc1" || s == "HC1") return CovarianceKind::hc1;
  if (s == "hc3" || s == "HC3") return CovarianceKind::hc3;
  throw DataError("unknown covariance '" + s + "' (model, hc0, hc1, hc3)");
}

inline std::string to_string(CovarianceKind k) {
  switch (k) {
    case CovarianceKind::model: return "model";
    case CovarianceKind::hc0: return "sandwich-HC0";
    case CovarianceKind::hc1: return "sandwich-HC1";
    case CovarianceKind::hc3: return "sandwich-HC3";
  }
  return "?";
}

inline SandwichFlavor flavor_of(CovarianceKind k) {
  switch (k) {
    case CovarianceKind::hc1: return SandwichFlavor::HC1;
    case CovarianceKind::hc3: return SandwichFlavor::HC3;
    default: return SandwichFlavor::HC0;
  }
}

// Smallest p-value reported; Monte Carlo precision cannot resolve less.
inline constexpr double kMinReportedP = 1e-6;

struct JointRow {
  std::string label;
  RowTag tag;
  double estimate = 0.0;
  double se = 0.0;
  double tstat = 0.0;
  double p_adj = 1.0;
  double p_raw = 1.0;  // unadjusted univariate p of the same row
  double sci_lower = -kInf;
  double sci_upper = kInf;
};

struct JointResult {
  std::string title;
  std::vector<JointRow> rows;
  Eigen::MatrixXd corr_used;
  double df_used = kInf;
  double alpha = 0.05;
  Alternative alternative = Alternative::two_sided;
  std::string covariance_kind = "model";
  double critical_value = 0.0;
  double mc_error = 0.0;  // largest Monte Carlo error among the p-values
  std::string scale = "difference";
};

struct JointTestOptions {
  double alpha = 0.05;
  Alternative alternative = Alternative::two_sided;
  std::uint64_t seed = kDefaultSeed;
  MvtOptions mvt{};
  bool intervals = true;
};

// Core: estimates with their covariance and a reference df.
inline JointResult joint_from_estimates(const Eigen::VectorXd& est, const Eigen::MatrixXd& cov, double df,
                                        const std::vector<std::string>& labels, const std::vector<RowTag>& tags,
                                        const JointTestOptions& opt, std::string covariance_kind) {
  const auto q = est.size();
  if (q == 0) throw ModelError("no contrasts to test");
  if (cov.rows() != q || cov.cols() != q || static_cast<Eigen::Index>(labels.size()) != q)
    throw ModelError("dimension mismatch between estimates and covariance");
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw ModelError("alpha must lie in (0, 1)");

  JointResult res;
  res.df_used = df;
  res.alpha = opt.alpha;
  res.alternative = opt.alternative;
  res.covariance_kind = std::move(covariance_kind);
  Eigen::VectorXd se(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const double v = cov(i, i);
    if (!(v > 0.0) || !std::isfinite(v))
      throw ModelError("contrast '" + labels[static_cast<std::size_t>(i)] + "' has zero standard error (degenerate)");
    se(i) = std::sqrt(v);
  }
  res.corr_used = se.cwiseInverse().asDiagonal() * cov * se.cwiseInverse().asDiagonal();
  res.corr_used.diagonal().setOnes();
  res.corr_used = 0.5 * (res.corr_used + res.corr_used.transpose()).eval();

  std::vector<double> t(static_cast<std::size_t>(q));
  for (Eigen::Index i = 0; i < q; ++i) t[static_cast<std::size_t>(i)] = est(i) / se(i);

  MvtIntegrator integ(res.corr_used, df, opt.seed, opt.mvt);
  const auto adj = adjusted_p(integ, t, opt.alternative);
  res.mc_error = adj.max_error;

  if (opt.intervals) {
    const Tail tail = opt.alternative == Alternative::two_sided ? Tail::two_sided : Tail::one_sided;
    res.critical_value = equicoordinate_quantile(integ, opt.alpha, tail).value;
  }

  for (Eigen::Index i = 0; i < q; ++i) {
    const auto k = static_cast<std::size_t>(i);
    JointRow r;
    r.label = labels[k];
    r.tag = k < tags.size() ? tags[k] : RowTag::pooled();
    r.estimate = est(i);
    r.se = se(i);
    r.tstat = t[k];
    r.p_adj = std::max(adj.p[k], kMinReportedP);
    r.p_raw = univariate_p(t[k], df, opt.alternative);
    if (opt.intervals) {
      const double h = res.critical_value * se(i);
      switch (opt.alternative) {
        case Alternative::greater: r.sci_lower = est(i) - h; break;
        case Alternative::less: r.sci_upper = est(i) + h; break;
        case Alternative::two_sided:
          r.sci_lower = est(i) - h;
          r.sci_upper = est(i) + h;
          break;
      }
    }
    res.rows.push_back(std::move(r));
  }
  return res;
}

// K beta and K V K', skipping zero coefficients so empty (NaN) cells never leak in.
inline Eigen::VectorXd contrast_estimates(const Eigen::MatrixXd& K, const Eigen::VectorXd& beta) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(K.rows());
  for (Eigen::Index r = 0; r < K.rows(); ++r)
    for (Eigen::Index c = 0; c < K.cols(); ++c)
      if (K(r, c) != 0.0) out(r) += K(r, c) * beta(c);
  return out;
}

inline Eigen::MatrixXd contrast_covariance(const Eigen::MatrixXd& K, const Eigen::MatrixXd& V) {
  return K * V * K.transpose();
}

inline JointResult run_joint_test(const CellMeansFit& fit, const Eigen::MatrixXd& vcov, const ContrastMatrix& cm,
                                  const JointTestOptions& opt, std::string covariance_kind = "model") {
  if (static_cast<std::size_t>(cm.cols()) != fit.n_cells() || vcov.rows() != cm.cols() || vcov.cols() != cm.cols())
    throw ModelError("contrast matrix columns do not match the fitted cells");
  check_against_layout(cm, fit.layout);
  const Eigen::VectorXd est = contrast_estimates(cm.coef, fit.beta);
  const Eigen::MatrixXd cov = contrast_covariance(cm.coef, vcov);
  auto res = joint_from_estimates(est, cov, fit.df_resid, cm.labels, cm.tags, opt, std::move(covariance_kind));
  if (fit.family == ModelFamily::binomial_logit) res.scale = "log-odds";
  return res;
}

// Covariance of a gaussian cell-means fit per requested kind.
inline Eigen::MatrixXd select_covariance(const LongDataset& ds, const CellMeansFit& fit, CovarianceKind kind) {
  if (kind == CovarianceKind::model) return fit.vcov_model;
  return sandwich_covariance(ds, fit, flavor_of(kind)).vcov_robust;
}

inline JointResult run_joint_test(const LongDataset& ds, const ContrastMatrix& cm, CovarianceKind kind,
                                  const JointTestOptions& opt) {
  const auto fit = fit_gaussian_cell_means(ds);
  return run_joint_test(fit, select_covariance(ds, fit, kind), cm, opt, to_string(kind));
}

// Prototype family built on the given per-level sizes of `ds`.
inline ContrastMatrix family_for(const FamilySpec& spec, const CellLayout& L) {
  const auto n = primary_level_sizes(L);
  return build_family(spec, L.a_levels, n);
}

// The stratum analysed on its own: own residual variance and df.
inline JointResult run_separate_test(const LongDataset& ds, const std::string& stratum, const FamilySpec& spec,
                                     CovarianceKind kind, const JointTestOptions& opt) {
  const auto sub = ds.restrict_to_stratum(ds.b_index(stratum));
  auto proto = family_for(spec, sub.layout());
  auto cm = expand_joint(proto, sub.layout(), {true, false});
  auto res = run_joint_test(sub, cm, kind, opt);
  res.title = "separate: " + stratum + " alone";
  return res;
}

// Strata collapsed into one sample per primary level; reported outside the joint family.
inline JointResult run_global_test(const LongDataset& ds, const FamilySpec& spec, CovarianceKind kind,
                                   const JointTestOptions& opt) {
  const auto flat = ds.collapse_strata();
  auto proto = family_for(spec, flat.layout());
  auto cm = expand_joint(proto, flat.layout(), {true, false});
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    cm.labels[i] = "g: " + proto.labels[i];
    cm.tags[i] = RowTag::global();
  }
  auto res = run_joint_test(flat, cm, kind, opt);
  res.title = "global (strata collapsed)";
  return res;
}

inline JointResult run_global_test(const BinomialDataset& ds, const FamilySpec& spec, std::optional<bool> add_two,
                                   const JointTestOptions& opt) {
  const auto flat = ds.collapse_strata();
  const auto fit = fit_binomial_logit(flat, add_two);
  auto proto = family_for(spec, flat.layout());
  auto cm = expand_joint(proto, flat.layout(), {true, false});
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    cm.labels[i] = "g: " + proto.labels[i];
    cm.tags[i] = RowTag::global();
  }
  auto res = run_joint_test(fit, fit.vcov_model, cm, opt);
  res.title = "global (strata collapsed)";
  return res;
}

// Primary-factor contrasts in the additive model y ~ A + B (no interaction):
// the classical pooled analysis. `proto` has one column per primary level.
inline JointResult run_additive_test(const LongDataset& ds, const ContrastMatrix& proto, CovarianceKind kind,
                                     const JointTestOptions& opt) {
  if (static_cast<std::size_t>(proto.cols()) != ds.a_levels().size())
    throw ModelError("prototype columns do not match the primary levels");
  const auto fit = fit_ols(additive_design(ds), response_vector(ds));
  // alpha_0 = 0 under treatment coding, so zero-sum rows map onto columns 1..|A|-1
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(proto.rows(), fit.X.cols());
  for (Eigen::Index r = 0; r < proto.rows(); ++r)
    for (Eigen::Index a = 1; a < proto.cols(); ++a) K(r, a) = proto.coef(r, a);
  const Eigen::MatrixXd V = kind == CovarianceKind::model ? fit.vcov_model() : fit.vcov_sandwich(flavor_of(kind));
  std::vector<std::string> labels;
  for (const auto& l : proto.labels) labels.push_back("a: " + l);
  auto res = joint_from_estimates(K * fit.beta, K * V * K.transpose(), fit.df_resid, labels,
                                  std::vector<RowTag>(labels.size(), RowTag::pooled()), opt, to_string(kind));
  res.title = "additive model (pooled analysis)";
  return res;
}

struct FTest {
  double F = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;
  double p = 1.0;
};

// A x B interaction: additive model against the full cell-means model.
inline FTest interaction_f_test(const LongDataset& ds) {
  if (ds.a_levels().size() < 2 || ds.b_levels().size() < 2)
    throw ModelError("interaction test needs at least 2 levels in both factors");
  const auto& L = ds.layout();
  const double N = static_cast<double>(ds.size());
  const double cells = static_cast<double>(L.nonempty_cells());
  const double df_full = N - cells;
  if (df_full < 1) throw ModelError("saturated interaction model: no residual degrees of freedom");
  const auto full = fit_gaussian_cell_means(ds);
  const double rss_full = full.sigma2 * full.df_resid;
  const auto add = fit_ols(additive_design(ds), response_vector(ds));
  FTest t;
  t.df1 = cells - static_cast<double>(add.rank);
  t.df2 = df_full;
  if (t.df1 < 1) throw ModelError("no interaction degrees of freedom in this design");
  if (rss_full <= 0.0) throw ModelError("zero residual variance in the interaction model");
  t.F = ((add.rss - rss_full) / t.df1) / (rss_full / t.df2);
  t.p = f_sf(t.F, t.df1, t.df2);
  return t;
}

}  // namespace jointmct
