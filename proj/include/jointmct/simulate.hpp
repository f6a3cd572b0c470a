#pragma once

// Monte Carlo comparison of
//   (a) the joint single-step test (per-stratum + pooled rows in one family), and
//   (b) the interaction pre-test strategy: F test of A x B at pretest_alpha, then
//       separate per-stratum tests if significant, else the pooled additive-model test.
// FWER counts replications with at least one rejected true null.
//
// Decisions use critical values: p_adj_i <= alpha exactly when the row's
// statistic reaches the equicoordinate quantile of its family.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "jointmct/config.hpp"
#include "jointmct/contrasts.hpp"
#include "jointmct/dataset.hpp"
#include "jointmct/inference.hpp"
#include "jointmct/models.hpp"
#include "jointmct/mvt.hpp"
#include "jointmct/ols.hpp"

namespace jointmct {

struct Scenario {
  std::size_t k = 4;  // treatment levels; the control is level "0"
  std::size_t J = 2;  // strata
  std::vector<double> n;      // per cell, B-major, size (k+1)*J
  std::vector<double> means;  // per cell
  std::vector<double> sds;    // per cell
  ContrastFamily family = ContrastFamily::dunnett;
  Alternative alternative = Alternative::greater;
  double alpha = 0.05;
  double pretest_alpha = 0.05;
  std::size_t replications = 1000;
  std::uint64_t seed = 1;
  CovarianceKind covariance = CovarianceKind::model;
  double mvt_precision = 1e-3;  // per-replication quantiles (sandwich covariance)
  unsigned threads = 1;

  std::size_t n_cells() const { return (k + 1) * J; }

  static Scenario balanced(std::size_t k, std::size_t J, double n_per_cell, double mean = 0.0, double sd = 1.0) {
    Scenario s;
    s.k = k;
    s.J = J;
    s.n.assign(s.n_cells(), n_per_cell);
    s.means.assign(s.n_cells(), mean);
    s.sds.assign(s.n_cells(), sd);
    return s;
  }

  void validate() const {
    if (k < 1) throw DataError("scenario: k must be >= 1");
    if (J < 1) throw DataError("scenario: J must be >= 1");
    if (replications < 1) throw DataError("scenario: replications must be >= 1");
    if (n.size() != n_cells() || means.size() != n_cells() || sds.size() != n_cells())
      throw DataError("scenario: n, means and sds need " + std::to_string(n_cells()) + " entries (or one)");
    for (double v : n)
      if (v < 2 || v != std::floor(v)) throw DataError("scenario: every cell needs an integer n >= 2");
    for (double v : sds)
      if (!(v > 0)) throw DataError("scenario: standard deviations must be > 0");
    if (!(alpha > 0 && alpha <= 1)) throw DataError("scenario: alpha must lie in (0, 1]");
    if (!(pretest_alpha > 0 && pretest_alpha <= 1)) throw DataError("scenario: pretest_alpha must lie in (0, 1]");
  }

  std::vector<std::string> a_levels() const {
    std::vector<std::string> v;
    for (std::size_t i = 0; i <= k; ++i) v.push_back(std::to_string(i));
    return v;
  }
  std::vector<std::string> b_levels() const {
    std::vector<std::string> v;
    for (std::size_t j = 1; j <= J; ++j) v.push_back("B" + std::to_string(j));
    return v;
  }
};

inline Scenario load_scenario(const config::KeyValues& kv) {
  static const std::vector<std::string> known{"k",        "J",           "n",           "means",         "sds",
                                              "family",   "alternative", "alpha",       "pretest_alpha", "replications",
                                              "seed",     "covariance",  "mvt_precision", "threads"};
  for (const auto& key : kv.keys())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw DataError("scenario: unknown key '" + key + "'");
  Scenario s;
  if (auto v = kv.number("k")) s.k = static_cast<std::size_t>(*v);
  if (auto v = kv.number("J")) s.J = static_cast<std::size_t>(*v);
  auto broadcast = [&](const char* key, double fallback) {
    auto v = kv.numbers(key).value_or(std::vector<double>{fallback});
    if (v.size() == 1) v.assign(s.n_cells(), v[0]);
    return v;
  };
  s.n = broadcast("n", 10.0);
  s.means = broadcast("means", 0.0);
  s.sds = broadcast("sds", 1.0);
  if (auto v = kv.string("family")) s.family = parse_family(*v);
  if (auto v = kv.string("alternative")) s.alternative = parse_alternative(*v);
  if (auto v = kv.number("alpha")) s.alpha = *v;
  if (auto v = kv.number("pretest_alpha")) s.pretest_alpha = *v;
  if (auto v = kv.number("replications")) s.replications = static_cast<std::size_t>(*v);
  if (auto v = kv.number("seed")) s.seed = static_cast<std::uint64_t>(*v);
  if (auto v = kv.string("covariance")) s.covariance = parse_covariance(*v);
  if (auto v = kv.number("mvt_precision")) s.mvt_precision = *v;
  if (auto v = kv.number("threads")) s.threads = static_cast<unsigned>(std::max(1.0, *v));
  s.validate();
  return s;
}

struct SimReport {
  std::size_t replications = 0;
  double fwer_joint = 0.0;
  double fwer_pretest = 0.0;
  double mc_se_joint = 0.0;
  double mc_se_pretest = 0.0;
  double pretest_significant_rate = 0.0;
  std::vector<std::string> joint_labels;
  std::vector<double> power_joint;        // per joint row
  std::vector<bool> joint_true_null;
  std::vector<std::string> primary_labels;
  std::vector<double> power_pretest;      // per primary comparison, in whichever analysis ran
};

namespace detail {

inline bool rejects(double t, double crit, Alternative alt) {
  switch (alt) {
    case Alternative::greater: return t >= crit;
    case Alternative::less: return t <= -crit;
    case Alternative::two_sided: return std::abs(t) >= crit;
  }
  return false;
}

inline bool true_null(double delta, Alternative alt) {
  constexpr double tol = 1e-12;
  switch (alt) {
    case Alternative::greater: return delta <= tol;
    case Alternative::less: return delta >= -tol;
    case Alternative::two_sided: return std::abs(delta) <= tol;
  }
  return true;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 sm(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  return sm.next();
}

struct Family {
  Eigen::MatrixXd K;  // rows over the parameter vector of the analysis
  std::vector<double> delta;
  double crit = 0.0;  // cached when the correlation is data independent
};

inline double critical_value(const Eigen::MatrixXd& cov, double df, double alpha, Alternative alt,
                             const MvtOptions& opt, std::uint64_t seed) {
  if (alpha >= 1.0) return -kInf;
  const Eigen::VectorXd s = cov.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd corr = s.asDiagonal() * cov * s.asDiagonal();
  corr.diagonal().setOnes();
  corr = (0.5 * (corr + corr.transpose())).eval();
  const Tail tail = alt == Alternative::two_sided ? Tail::two_sided : Tail::one_sided;
  return equicoordinate_quantile(corr, df, alpha, tail, opt, seed).value;
}

struct RepOutcome {
  bool joint_false = false;
  bool pretest_false = false;
  bool pretest_significant = false;
  std::vector<char> joint_reject;
  std::vector<char> pretest_detect;
};

}  // namespace detail

class ScenarioRunner {
 public:
  explicit ScenarioRunner(Scenario s) : s_(std::move(s)) {
    s_.validate();
    const auto a_levels = s_.a_levels();
    const auto b_levels = s_.b_levels();
    layout_.a_levels = a_levels;
    layout_.b_levels = b_levels;
    layout_.cell_n = s_.n;
    FamilySpec spec{s_.family, std::string("0"), true};
    proto_ = build_family(spec, a_levels, primary_level_sizes(layout_));
    joint_cm_ = expand_joint(proto_, layout_, {true, true});
    const Eigen::Map<const Eigen::VectorXd> mu(s_.means.data(), static_cast<Eigen::Index>(s_.means.size()));

    joint_.K = joint_cm_.coef;
    const Eigen::VectorXd d = joint_.K * mu;
    joint_.delta.assign(d.data(), d.data() + d.size());

    // separate per-stratum analyses share the joint per-stratum rows' truth
    const auto q = proto_.rows();
    for (std::size_t b = 0; b < s_.J; ++b) {
      detail::Family f;
      f.K = proto_.coef;
      for (Eigen::Index r = 0; r < q; ++r) f.delta.push_back(joint_.delta[b * static_cast<std::size_t>(q) + static_cast<std::size_t>(r)]);
      strata_.push_back(f);
    }
    // pooled additive analysis: truth taken as the size-weighted pooled contrast
    additive_.K = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(s_.k + s_.J));
    for (Eigen::Index r = 0; r < q; ++r) {
      for (Eigen::Index a = 1; a < proto_.cols(); ++a) additive_.K(r, a) = proto_.coef(r, a);
      additive_.delta.push_back(joint_.delta[s_.J * static_cast<std::size_t>(q) + static_cast<std::size_t>(r)]);
    }

    if (s_.covariance == CovarianceKind::model) precompute_model_criticals();
  }

  SimReport run() const {
    std::vector<detail::RepOutcome> out(s_.replications);
    const unsigned threads = std::max(1u, s_.threads);
    if (threads == 1) {
      for (std::size_t r = 0; r < s_.replications; ++r) out[r] = replicate(r);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
          for (std::size_t r = t; r < s_.replications; r += threads) out[r] = replicate(r);
        });
      for (auto& th : pool) th.join();
    }
    return summarize(out);
  }

  const ContrastMatrix& joint_contrasts() const { return joint_cm_; }
  const ContrastMatrix& prototype() const { return proto_; }
  double joint_critical_value() const { return joint_.crit; }

  // Generated data of one replication (exposed for tests).
  LongDataset generate(std::size_t rep) const {
    std::seed_seq seq{static_cast<std::uint32_t>(s_.seed), static_cast<std::uint32_t>(s_.seed >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(static_cast<std::uint64_t>(rep) >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> z;
    std::vector<Observation> obs;
    for (std::size_t b = 0; b < s_.J; ++b)
      for (std::size_t a = 0; a <= s_.k; ++a) {
        const auto c = layout_.cell(a, b);
        for (int i = 0; i < static_cast<int>(s_.n[c]); ++i) obs.push_back({s_.means[c] + s_.sds[c] * z(rng), a, b});
      }
    return LongDataset(layout_.a_levels, layout_.b_levels, std::move(obs), true);
  }

 private:
  MvtOptions cached_options() const {
    MvtOptions o;
    o.precision = 1e-4;
    return o;
  }

  MvtOptions rep_options() const {
    MvtOptions o;
    o.precision = s_.mvt_precision;
    return o;
  }

  void precompute_model_criticals() {
    // correlations depend only on the cell sizes under the model covariance
    Eigen::MatrixXd Vcells = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s_.n_cells()), static_cast<Eigen::Index>(s_.n_cells()));
    for (std::size_t c = 0; c < s_.n_cells(); ++c) Vcells(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = 1.0 / s_.n[c];
    double N = 0.0;
    for (double v : s_.n) N += v;
    const double df_joint = N - static_cast<double>(s_.n_cells());
    joint_.crit = detail::critical_value(joint_.K * Vcells * joint_.K.transpose(), df_joint, s_.alpha, s_.alternative,
                                         cached_options(), s_.seed);
    for (std::size_t b = 0; b < s_.J; ++b) {
      const auto m = static_cast<Eigen::Index>(s_.k + 1);
      Eigen::MatrixXd V = Eigen::MatrixXd::Zero(m, m);
      double Nb = 0.0;
      for (std::size_t a = 0; a <= s_.k; ++a) {
        V(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = 1.0 / s_.n[layout_.cell(a, b)];
        Nb += s_.n[layout_.cell(a, b)];
      }
      strata_[b].crit = detail::critical_value(strata_[b].K * V * strata_[b].K.transpose(), Nb - static_cast<double>(m),
                                               s_.alpha, s_.alternative, cached_options(), s_.seed + 1 + b);
    }
    const auto ds = generate(0);
    const Eigen::MatrixXd X = additive_design(ds);
    const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
    additive_.crit = detail::critical_value(additive_.K * xtx_inv * additive_.K.transpose(),
                                            static_cast<double>(X.rows() - X.cols()), s_.alpha, s_.alternative,
                                            cached_options(), s_.seed + 1000);
  }

  detail::RepOutcome replicate(std::size_t rep) const {
    const auto ds = generate(rep);
    detail::RepOutcome o;
    const bool fixed = s_.covariance == CovarianceKind::model;
    const auto rep_seed = detail::mix_seed(s_.seed, rep);

    // (a) joint test
    {
      const auto fit = fit_gaussian_cell_means(ds);
      const Eigen::MatrixXd V = select_covariance(ds, fit, s_.covariance);
      const Eigen::VectorXd est = joint_.K * fit.beta;
      const Eigen::MatrixXd cov = joint_.K * V * joint_.K.transpose();
      const double crit =
          fixed ? joint_.crit : detail::critical_value(cov, fit.df_resid, s_.alpha, s_.alternative, rep_options(), rep_seed);
      o.joint_reject.resize(static_cast<std::size_t>(est.size()));
      for (Eigen::Index i = 0; i < est.size(); ++i) {
        const double t = est(i) / std::sqrt(cov(i, i));
        const bool rej = s_.alpha >= 1.0 || detail::rejects(t, crit, s_.alternative);
        o.joint_reject[static_cast<std::size_t>(i)] = rej;
        if (rej && detail::true_null(joint_.delta[static_cast<std::size_t>(i)], s_.alternative)) o.joint_false = true;
      }
    }

    // (b) pre-test strategy
    const auto q = static_cast<std::size_t>(proto_.rows());
    o.pretest_detect.assign(q, 0);
    double f_p = 1.0;
    if (s_.J >= 2) f_p = interaction_f_test(ds).p;
    o.pretest_significant = s_.J >= 2 && f_p <= s_.pretest_alpha;
    auto apply = [&](const detail::Family& fam, const Eigen::VectorXd& est, const Eigen::MatrixXd& cov, double crit) {
      for (std::size_t r = 0; r < q; ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        const double t = est(i) / std::sqrt(cov(i, i));
        const bool rej = s_.alpha >= 1.0 || detail::rejects(t, crit, s_.alternative);
        if (!rej) continue;
        o.pretest_detect[r] = 1;
        if (detail::true_null(fam.delta[r], s_.alternative)) o.pretest_false = true;
      }
    };
    if (o.pretest_significant) {
      for (std::size_t b = 0; b < s_.J; ++b) {
        const auto sub = ds.restrict_to_stratum(b);
        const auto fit = fit_gaussian_cell_means(sub);
        const Eigen::MatrixXd V = select_covariance(sub, fit, s_.covariance);
        const Eigen::VectorXd est = strata_[b].K * fit.beta;
        const Eigen::MatrixXd cov = strata_[b].K * V * strata_[b].K.transpose();
        const double crit = fixed ? strata_[b].crit
                                  : detail::critical_value(cov, fit.df_resid, s_.alpha, s_.alternative, rep_options(),
                                                           rep_seed + 1 + b);
        apply(strata_[b], est, cov, crit);
      }
    } else {
      const auto fit = fit_ols(additive_design(ds), response_vector(ds));
      const Eigen::MatrixXd V = fixed ? fit.vcov_model() : fit.vcov_sandwich(flavor_of(s_.covariance));
      const Eigen::VectorXd est = additive_.K * fit.beta;
      const Eigen::MatrixXd cov = additive_.K * V * additive_.K.transpose();
      const double crit = fixed ? additive_.crit
                                : detail::critical_value(cov, fit.df_resid, s_.alpha, s_.alternative, rep_options(),
                                                         rep_seed + 1000);
      apply(additive_, est, cov, crit);
    }
    return o;
  }

  SimReport summarize(const std::vector<detail::RepOutcome>& out) const {
    SimReport rep;
    rep.replications = out.size();
    const double R = static_cast<double>(out.size());
    const auto qj = joint_cm_.labels.size();
    rep.joint_labels = joint_cm_.labels;
    rep.primary_labels = proto_.labels;
    rep.power_joint.assign(qj, 0.0);
    rep.power_pretest.assign(proto_.labels.size(), 0.0);
    for (std::size_t i = 0; i < qj; ++i) rep.joint_true_null.push_back(detail::true_null(joint_.delta[i], s_.alternative));
    double fj = 0, fp = 0, sig = 0;
    for (const auto& o : out) {
      fj += o.joint_false;
      fp += o.pretest_false;
      sig += o.pretest_significant;
      for (std::size_t i = 0; i < qj; ++i) rep.power_joint[i] += o.joint_reject[i];
      for (std::size_t i = 0; i < o.pretest_detect.size(); ++i) rep.power_pretest[i] += o.pretest_detect[i];
    }
    for (auto& v : rep.power_joint) v /= R;
    for (auto& v : rep.power_pretest) v /= R;
    rep.fwer_joint = fj / R;
    rep.fwer_pretest = fp / R;
    rep.pretest_significant_rate = sig / R;
    rep.mc_se_joint = std::sqrt(rep.fwer_joint * (1.0 - rep.fwer_joint) / R);
    rep.mc_se_pretest = std::sqrt(rep.fwer_pretest * (1.0 - rep.fwer_pretest) / R);
    return rep;
  }

  Scenario s_;
  CellLayout layout_;
  ContrastMatrix proto_;
  ContrastMatrix joint_cm_;
  detail::Family joint_;
  std::vector<detail::Family> strata_;
  detail::Family additive_;
};

inline SimReport run_scenario(const Scenario& s) { return ScenarioRunner(s).run(); }

}  // namespace jointmct
