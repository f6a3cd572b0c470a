#pragma once

// Multivariate normal / t rectangle probabilities by randomized quasi-Monte
// Carlo (separation of variables with variable prioritization, randomly
// shifted Korobov lattice rules with the baker's transform), equicoordinate
// quantiles, and single-step adjusted p-values.
//
// The t case integrates the normal problem with bounds scaled by
// sqrt(chi2_df/df); one extra lattice coordinate drives that scale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>

#include "jointmct/contrasts.hpp"
#include "jointmct/distributions.hpp"
#include "jointmct/error.hpp"

namespace jointmct {

struct MvtProblem {
  Eigen::MatrixXd corr;
  double df = kInf;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct ProbEstimate {
  double value = 0.0;
  double mc_error = 0.0;  // 3.5 standard errors over the randomizations
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  bool converged = true;  // false when the sample cap stopped refinement
  std::size_t rule = 0;   // lattice rule of the final estimate
};

struct MvtOptions {
  double precision = 1e-4;
  std::size_t max_samples = 10'000'000;
  int randomizations = 12;
  std::size_t initial_points = 1000;  // smallest lattice size used by adaptive integration
  unsigned threads = 1;
};

enum class Tail { one_sided, two_sided };

inline constexpr std::uint64_t kDefaultSeed = 20240229;

namespace detail {

// splitmix64: portable, fully specified stream for lattice shifts.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Korobov rank-1 lattice rules: prime sizes roughly doubling, each with a
// generator a (z_j = a^j mod n) chosen by a P2-criterion search with product
// weights 1/j^2 over 16 dimensions.
struct LatticeRule {
  std::uint64_t n;
  std::uint64_t a;
};

inline const std::vector<LatticeRule>& lattice_rules() {
  static const std::vector<LatticeRule> rules{
      {1031, 429},     {2053, 130},     {4099, 398},       {8209, 538},       {16411, 7157},    {32771, 3523},
      {65537, 28266},  {131101, 20468}, {262147, 49005},   {524309, 101876},  {1048583, 436643}};
  return rules;
}

inline std::vector<std::uint64_t> korobov_vector(const LatticeRule& r, std::size_t dim) {
  std::vector<std::uint64_t> z(dim);
  std::uint64_t v = 1;
  for (auto& x : z) {
    x = v;
    v = (v * r.a) % r.n;
  }
  return z;
}

// Clips eigenvalues in [-tol, 0) to zero and rescales to unit diagonal.
inline Eigen::MatrixXd regularize_correlation(const Eigen::MatrixXd& corr, double tol = 1e-8) {
  const auto q = corr.rows();
  if (q == 0) throw NumericError("correlation matrix is empty");
  if (corr.cols() != q) throw NumericError("correlation matrix is not square");
  if (!corr.allFinite()) throw NumericError("correlation matrix has non-finite entries");
  const double asym = (corr - corr.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8) throw NumericError("correlation matrix is not symmetric");
  for (Eigen::Index i = 0; i < q; ++i)
    if (std::abs(corr(i, i) - 1.0) > 1e-8) throw NumericError("correlation matrix must have unit diagonal");
  Eigen::MatrixXd c = 0.5 * (corr + corr.transpose());
  c.diagonal().setOnes();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  const double min_ev = es.eigenvalues().minCoeff();
  if (min_ev < -tol)
    throw NumericError("correlation matrix is not positive semi-definite (min eigenvalue " + std::to_string(min_ev) +
                       ")");
  if (min_ev < 0.0) {
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    c = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd d = c.diagonal().cwiseSqrt().cwiseInverse();
    c = d.asDiagonal() * c * d.asDiagonal();
    c.diagonal().setOnes();
  }
  return c;
}

// Truncated standard normal mean on (a, b).
inline double truncated_mean(double a, double b) {
  const double p = norm_cdf(b) - norm_cdf(a);
  if (p > 1e-300) return (norm_pdf(a) - norm_pdf(b)) / p;
  if (a > 0) return a;
  if (b < 0) return b;
  return 0.0;
}

// Phi^-1(plo + w (phi - plo)) computed in the tail that keeps precision.
inline double conditional_draw(double lo_x, double hi_x, double plo, double phi, double w) {
  if (plo > 0.5) {
    const double ulo = norm_sf(lo_x), uhi = norm_sf(hi_x);
    return -norm_quantile(uhi + (1.0 - w) * (ulo - uhi));
  }
  return norm_quantile(plo + w * (phi - plo));
}

// Cholesky factor with Genz-Bretz variable prioritization for one set of bounds.
// Rows with no variance left (linear combinations of earlier ones) are not
// integrated; each becomes an interval constraint on the last variable its
// row depends on, which keeps the integrand continuous.
struct OrderedFactor {
  struct Fold {
    Eigen::Index row;
    double coef;  // L(row, step)
  };
  Eigen::MatrixXd L;
  Eigen::VectorXd a, b;
  std::vector<bool> degenerate;
  std::vector<Eigen::Index> steps;             // non-degenerate rows in integration order
  std::vector<std::vector<Fold>> folds;        // per step
  std::vector<Eigen::Index> unfolded;          // degenerate rows depending on no variable
};

inline OrderedFactor prioritized_cholesky(const Eigen::MatrixXd& corr, const Eigen::VectorXd& lower,
                                          const Eigen::VectorXd& upper) {
  const auto q = corr.rows();
  Eigen::MatrixXd C = corr;
  OrderedFactor f;
  f.L = Eigen::MatrixXd::Zero(q, q);
  f.a = lower;
  f.b = upper;
  f.degenerate.assign(static_cast<std::size_t>(q), false);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(q);
  constexpr double kVarEps = 1e-10;

  for (Eigen::Index i = 0; i < q; ++i) {
    Eigen::Index best = i;
    double best_p = kInf;
    for (Eigen::Index j = i; j < q; ++j) {
      const double v = C(j, j) - f.L.row(j).head(i).squaredNorm();
      double p = 2.0;  // degenerate coordinates go last
      if (v > kVarEps) {
        const double s = std::sqrt(v);
        const double mu = f.L.row(j).head(i).dot(y.head(i));
        p = norm_cdf((f.b(j) - mu) / s) - norm_cdf((f.a(j) - mu) / s);
      }
      if (p < best_p) {
        best_p = p;
        best = j;
      }
    }
    if (best != i) {
      C.row(i).swap(C.row(best));
      C.col(i).swap(C.col(best));
      f.L.row(i).swap(f.L.row(best));
      std::swap(f.a(i), f.a(best));
      std::swap(f.b(i), f.b(best));
    }
    const double v = C(i, i) - f.L.row(i).head(i).squaredNorm();
    if (v > kVarEps) {
      const double s = std::sqrt(v);
      f.L(i, i) = s;
      for (Eigen::Index j = i + 1; j < q; ++j)
        f.L(j, i) = (C(j, i) - f.L.row(j).head(i).dot(f.L.row(i).head(i))) / s;
      const double mu = f.L.row(i).head(i).dot(y.head(i));
      y(i) = truncated_mean((f.a(i) - mu) / s, (f.b(i) - mu) / s);
    } else {
      f.degenerate[static_cast<std::size_t>(i)] = true;
      y(i) = f.L.row(i).head(i).dot(y.head(i));
    }
  }
  for (Eigen::Index i = 0; i < q; ++i)
    if (!f.degenerate[static_cast<std::size_t>(i)]) f.steps.push_back(i);
  f.folds.resize(f.steps.size());
  for (Eigen::Index i = 0; i < q; ++i) {
    if (!f.degenerate[static_cast<std::size_t>(i)]) continue;
    std::size_t last = f.steps.size();
    for (std::size_t k = 0; k < f.steps.size(); ++k)
      if (f.steps[k] < i && std::abs(f.L(i, f.steps[k])) > 1e-10) last = k;
    if (last == f.steps.size()) f.unfolded.push_back(i);
    else f.folds[last].push_back({i, f.L(i, f.steps[last])});
  }
  return f;
}

}  // namespace detail

// Reusable integrator for one correlation matrix and df; bounds vary per call.
// Results depend only on (bounds, lattice rule, seed).
class MvtIntegrator {
 public:
  MvtIntegrator(const Eigen::MatrixXd& corr, double df, std::uint64_t seed, MvtOptions opt = {})
      : corr_(detail::regularize_correlation(corr)), df_(df), seed_(seed), opt_(opt) {
    if (!(df > 0)) throw NumericError("degrees of freedom must be positive");
    if (!is_infinite_df(df_)) chi_ = ChiScaleTable::get(df_);
    if (opt_.randomizations < 2) throw NumericError("need at least 2 randomizations for an error estimate");
    if (corr_.rows() > 255) throw NumericError("dimension too large");
    detail::SplitMix64 rng(seed);
    shifts_.resize(static_cast<std::size_t>(opt_.randomizations));
    for (auto& s : shifts_) {
      s.resize(static_cast<std::size_t>(corr_.rows()) + 1);
      for (auto& x : s) x = rng.uniform();
    }
  }

  Eigen::Index dim() const { return corr_.rows(); }
  const Eigen::MatrixXd& correlation() const { return corr_; }
  double df() const { return df_; }
  const MvtOptions& options() const { return opt_; }

  // One fixed lattice rule (index into detail::lattice_rules()).
  ProbEstimate integrate(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, std::size_t rule) const {
    Plan plan = make_plan(lower, upper);
    if (plan.trivial) return exact(plan);
    return run_rule(plan, std::min(rule, max_rule()));
  }

  // Moves to larger lattices until the error bound reaches the precision or
  // the sample cap.
  ProbEstimate integrate_adaptive(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                  double precision) const {
    Plan plan = make_plan(lower, upper);
    if (plan.trivial) return exact(plan);
    for (std::size_t rule = first_rule();; ++rule) {
      auto est = run_rule(plan, rule);
      if (est.mc_error <= precision) return est;
      if (rule >= max_rule()) {
        est.converged = false;
        return est;
      }
    }
  }

  // Smallest rule meeting the precision at these bounds.
  std::size_t rule_for(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, double precision) const {
    Plan plan = make_plan(lower, upper);
    if (plan.trivial) return first_rule();
    for (std::size_t rule = first_rule();; ++rule)
      if (rule >= max_rule() || run_rule(plan, rule).mc_error <= precision) return rule;
  }

  std::size_t first_rule() const {
    const auto& rules = detail::lattice_rules();
    std::size_t r = 0;
    while (r + 1 < rules.size() && rules[r].n < opt_.initial_points) ++r;
    return std::min(r, max_rule());
  }

  std::size_t max_rule() const {
    const auto& rules = detail::lattice_rules();
    std::size_t r = 0;
    while (r + 1 < rules.size() && rules[r + 1].n * shifts_.size() <= opt_.max_samples) ++r;
    return r;
  }

 private:
  struct Plan {
    bool trivial = false;
    double exact_value = 0.0;
    detail::OrderedFactor factor;
    // univariate case handled exactly
    bool univariate = false;
    double ua = 0.0, ub = 0.0;
  };

  Plan make_plan(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) const {
    const auto q = corr_.rows();
    if (lower.size() != q || upper.size() != q) throw NumericError("bounds do not match the dimension");
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < q; ++i) {
      if (std::isnan(lower(i)) || std::isnan(upper(i))) throw NumericError("NaN integration bound");
      if (lower(i) > upper(i)) throw NumericError("lower bound exceeds upper bound");
      if (lower(i) == upper(i)) return {true, 0.0, {}, false, 0, 0};
      if (lower(i) == -kInf && upper(i) == kInf) continue;
      keep.push_back(i);
    }
    Plan p;
    if (keep.empty()) {
      p.trivial = true;
      p.exact_value = 1.0;
      return p;
    }
    if (keep.size() == 1) {
      p.trivial = true;
      const double lo = lower(keep[0]), hi = upper(keep[0]);
      p.exact_value = hi <= 0 ? t_cdf(hi, df_) - t_cdf(lo, df_) : t_sf(lo, df_) - t_sf(hi, df_);
      return p;
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd c(m, m);
    Eigen::VectorXd a(m), b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      a(i) = lower(keep[static_cast<std::size_t>(i)]);
      b(i) = upper(keep[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < m; ++j) c(i, j) = corr_(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
    }
    p.factor = detail::prioritized_cholesky(c, a, b);
    return p;
  }

  ProbEstimate exact(const Plan& p) const {
    ProbEstimate e;
    e.value = std::clamp(p.exact_value, 0.0, 1.0);
    e.mc_error = 0.0;
    e.n_samples = 0;
    e.seed = seed_;
    return e;
  }

  // y holds standard normal draws indexed by factor row.
  double integrand(const detail::OrderedFactor& f, const double* w, double chi_w, double* y) const {
    const double s = is_infinite_df(df_) ? 1.0 : detail_chi(chi_w);
    auto scaled = [s](double v) { return std::isinf(v) ? v : v * s; };
    auto partial = [&](Eigen::Index row, Eigen::Index upto) {
      double mu = 0.0;
      for (Eigen::Index m = 0; m < upto; ++m)
        if (!f.degenerate[static_cast<std::size_t>(m)]) mu += f.L(row, m) * y[m];
      return mu;
    };
    for (auto row : f.unfolded)
      if (0.0 < scaled(f.a(row)) || 0.0 > scaled(f.b(row))) return 0.0;
    double prob = 1.0;
    const std::size_t n = f.steps.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::Index i = f.steps[k];
      const double mu = partial(i, i);
      const double lii = f.L(i, i);
      double lo_x = (scaled(f.a(i)) - mu) / lii, hi_x = (scaled(f.b(i)) - mu) / lii;
      for (const auto& fold : f.folds[k]) {
        const double md = partial(fold.row, i);
        double l = (scaled(f.a(fold.row)) - md) / fold.coef, h = (scaled(f.b(fold.row)) - md) / fold.coef;
        if (fold.coef < 0) std::swap(l, h);
        lo_x = std::max(lo_x, l);
        hi_x = std::min(hi_x, h);
      }
      if (!(hi_x > lo_x)) return 0.0;
      const double plo = norm_cdf(lo_x), phi = norm_cdf(hi_x);
      double d = phi - plo;
      if (plo > 0.5) d = norm_sf(lo_x) - norm_sf(hi_x);
      if (!(d > 0.0)) return 0.0;
      prob *= d;
      if (k + 1 < n) y[i] = detail::conditional_draw(lo_x, hi_x, plo, phi, w[k]);
    }
    return prob;
  }

  double detail_chi(double w) const { return (*chi_)(w); }

  ProbEstimate run_rule(const Plan& plan, std::size_t rule) const {
    const auto& f = plan.factor;
    const auto q = f.steps.size();
    const auto& lr = detail::lattice_rules()[rule];
    const auto z = detail::korobov_vector(lr, q + 1);
    const double inv_n = 1.0 / static_cast<double>(lr.n);
    std::vector<double> sums(shifts_.size(), 0.0);
    auto run = [&](std::size_t first_shift, std::size_t last_shift) {
      std::vector<double> w(q + 1), y(static_cast<std::size_t>(f.L.rows()));
      for (std::size_t s = first_shift; s < last_shift; ++s) {
        const auto& shift = shifts_[s];
        double acc = 0.0;
        for (std::uint64_t k = 0; k < lr.n; ++k) {
          for (std::size_t j = 0; j <= q; ++j) {
            double x = static_cast<double>((k * z[j]) % lr.n) * inv_n + shift[j];
            x -= std::floor(x);
            w[j] = 1.0 - std::abs(2.0 * x - 1.0);
          }
          acc += integrand(f, w.data() + 1, w[0], y.data());
        }
        sums[s] = acc;
      }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(opt_.threads, static_cast<unsigned>(shifts_.size())));
    if (threads == 1) {
      run(0, shifts_.size());
    } else {
      std::vector<std::thread> pool;
      const std::size_t per = (shifts_.size() + threads - 1) / threads;
      for (std::size_t t = 0; t < shifts_.size(); t += per) pool.emplace_back(run, t, std::min(shifts_.size(), t + per));
      for (auto& th : pool) th.join();
    }
    auto est = finish(sums, static_cast<std::size_t>(lr.n));
    est.rule = rule;
    return est;
  }

  ProbEstimate finish(const std::vector<double>& sums, std::size_t points) const {
    const auto M = static_cast<double>(sums.size());
    double mean = 0.0;
    for (double s : sums) mean += s / static_cast<double>(points);
    mean /= M;
    double var = 0.0;
    for (double s : sums) {
      const double d = s / static_cast<double>(points) - mean;
      var += d * d;
    }
    var /= (M - 1.0);
    ProbEstimate e;
    e.value = std::clamp(mean, 0.0, 1.0);
    e.mc_error = 3.5 * std::sqrt(var / M);
    e.n_samples = points * sums.size();
    e.seed = seed_;
    return e;
  }

  Eigen::MatrixXd corr_;
  double df_;
  std::uint64_t seed_;
  MvtOptions opt_;
  std::vector<std::vector<double>> shifts_;
  std::shared_ptr<const ChiScaleTable> chi_;
};

inline ProbEstimate mvt_cdf(const MvtProblem& p, const MvtOptions& opt = {}, std::uint64_t seed = kDefaultSeed) {
  if (p.corr.rows() == 0) throw NumericError("mvt_cdf: dimension must be at least 1");
  MvtIntegrator integ(p.corr, p.df, seed, opt);
  return integ.integrate_adaptive(p.lower, p.upper, opt.precision);
}

struct QuantileResult {
  double value = 0.0;
  ProbEstimate coverage;  // P(max T <= value) or P(max |T| <= value)
  int iterations = 0;
};

namespace detail {

inline void equicoordinate_bounds(double c, Tail tail, Eigen::Index q, Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
  hi = Eigen::VectorXd::Constant(q, c);
  lo = tail == Tail::one_sided ? Eigen::VectorXd::Constant(q, -kInf) : Eigen::VectorXd::Constant(q, -c);
}

}  // namespace detail

// Root of P(max T <= c) = 1 - alpha (one-sided) or P(max |T| <= c) = 1 - alpha.
// The lattice size is frozen while bracketing so the objective is a smooth
// monotone function of c; it is then re-checked adaptively at the root.
inline QuantileResult equicoordinate_quantile(const MvtIntegrator& integ, double alpha, Tail tail) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw NumericError("alpha must lie in (0, 1)");
  const auto q = integ.dim();
  const double df = integ.df();
  const double target = 1.0 - alpha;
  const double precision = integ.options().precision;
  const bool two = tail == Tail::two_sided;
  QuantileResult res;

  if (q == 1) {
    res.value = t_quantile(two ? 1.0 - alpha / 2.0 : 1.0 - alpha, df);
    res.coverage.value = target;
    res.coverage.seed = 0;
    return res;
  }

  const double qd = static_cast<double>(q);
  const double lo = t_quantile(two ? 1.0 - alpha / 2.0 : 1.0 - alpha, df);
  const double hi = t_quantile(two ? 1.0 - alpha / (2.0 * qd) : 1.0 - alpha / qd, df);
  Eigen::VectorXd bl, bu;

  // Root on a fixed rule inside [a, b], widening the bracket as needed but
  // never below the univariate quantile.
  auto solve = [&](std::size_t rule, double a, double b) {
    auto f = [&](double c) {
      detail::equicoordinate_bounds(c, tail, q, bl, bu);
      return integ.integrate(bl, bu, rule).value - target;
    };
    double fa = f(a);
    for (int widen = 0; fa > 0.0 && a > lo; ++widen) {
      if (widen > 60) throw NumericError("equicoordinate quantile: could not bracket the root");
      b = a;
      a = std::max(lo, a - std::max(0.05, b - a) * 2.0);
      fa = f(a);
    }
    if (fa >= 0.0) return a;  // coordinates perfectly correlated: the univariate quantile
    double fb = f(b);
    for (int widen = 0; fb <= 0.0; ++widen) {
      if (widen > 60) throw NumericError("equicoordinate quantile: could not bracket the root");
      a = b;
      fa = fb;
      b += std::max(0.5, 0.25 * b);
      fb = f(b);
    }
    std::uintmax_t iters = 100;
    auto tol = [](double x, double y) { return std::abs(x - y) <= 1e-7 * std::max(1.0, std::abs(x)); };
    auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    if (iters >= 100) throw NumericError("equicoordinate quantile: root finder did not converge");
    res.iterations += static_cast<int>(iters);
    return 0.5 * (r.first + r.second);
  };

  // Coarse root on the smallest rule, then Newton/secant steps on the rule
  // the target precision needs (the slope starts from the coarse rule).
  const std::size_t coarse = integ.first_rule();
  double root = solve(coarse, lo, hi);
  if (root <= lo) {
    detail::equicoordinate_bounds(root, tail, q, bl, bu);
    res.value = root;
    res.coverage = integ.integrate_adaptive(bl, bu, precision);
    return res;
  }
  const double h = 1e-3 * std::max(1.0, root);
  detail::equicoordinate_bounds(root + h, tail, q, bl, bu);
  const double p_up = integ.integrate(bl, bu, coarse).value;
  detail::equicoordinate_bounds(std::max(lo, root - h), tail, q, bl, bu);
  const double p_down = integ.integrate(bl, bu, coarse).value;
  double slope = (p_up - p_down) / (root + h - std::max(lo, root - h));

  detail::equicoordinate_bounds(root, tail, q, bl, bu);
  auto est = integ.integrate_adaptive(bl, bu, precision);
  std::size_t rule = est.rule;
  double prev_c = root, prev_p = est.value;
  for (int it = 0; it < 30; ++it) {
    ++res.iterations;
    const double err = est.value - target;
    if ((std::abs(err) <= 0.5 * precision && est.mc_error <= precision) ||
        (rule >= integ.max_rule() && std::abs(err) <= 2.0 * precision)) {
      res.value = root;
      res.coverage = est;
      return res;
    }
    if (est.mc_error > precision && rule < integ.max_rule()) {
      rule = std::min(rule + 1, integ.max_rule());
    } else {
      if (!(slope > 0.0)) slope = 1e-3;
      double step = -err / slope;
      step = std::clamp(step, -0.25 * std::max(1.0, root), 0.25 * std::max(1.0, root));
      prev_c = root;
      prev_p = est.value;
      root = std::max(lo, root + step);
    }
    detail::equicoordinate_bounds(root, tail, q, bl, bu);
    est = integ.integrate(bl, bu, rule);
    if (root != prev_c) {
      const double secant = (est.value - prev_p) / (root - prev_c);
      if (secant > 0.0) slope = secant;
    }
  }
  throw NumericError("equicoordinate quantile did not reach the requested precision");
}

inline QuantileResult equicoordinate_quantile(const Eigen::MatrixXd& corr, double df, double alpha, Tail tail,
                                              const MvtOptions& opt = {}, std::uint64_t seed = kDefaultSeed) {
  MvtIntegrator integ(corr, df, seed, opt);
  return equicoordinate_quantile(integ, alpha, tail);
}

struct AdjustedP {
  std::vector<double> p;
  double max_error = 0.0;
  bool converged = true;
};

// Single-step max-t adjusted p-values:
//   greater:   1 - P(all T_j <= t_i)
//   less:      1 - P(all T_j >= t_i)
//   two-sided: 1 - P(all |T_j| <= |t_i|)
inline AdjustedP adjusted_p(const MvtIntegrator& integ, const std::vector<double>& tstats, Alternative alt) {
  const auto q = integ.dim();
  if (static_cast<Eigen::Index>(tstats.size()) != q) throw NumericError("adjusted_p: statistics/correlation size mismatch");
  AdjustedP out;
  out.p.resize(tstats.size());
  const double precision = integ.options().precision;
  std::vector<std::pair<double, double>> cache;  // bound -> p
  for (std::size_t i = 0; i < tstats.size(); ++i) {
    const double t = tstats[i];
    if (std::isnan(t)) throw NumericError("adjusted_p: NaN statistic");
    double c = 0.0;
    Eigen::VectorXd lo, hi;
    switch (alt) {
      case Alternative::greater:
        c = t;
        lo = Eigen::VectorXd::Constant(q, -kInf);
        hi = Eigen::VectorXd::Constant(q, c);
        break;
      case Alternative::less:
        c = t;
        lo = Eigen::VectorXd::Constant(q, c);
        hi = Eigen::VectorXd::Constant(q, kInf);
        break;
      case Alternative::two_sided:
        c = std::abs(t);
        lo = Eigen::VectorXd::Constant(q, -c);
        hi = Eigen::VectorXd::Constant(q, c);
        break;
    }
    auto hit = std::find_if(cache.begin(), cache.end(), [&](const auto& e) { return e.first == c; });
    if (hit != cache.end()) {
      out.p[i] = hit->second;
      continue;
    }
    double p = 0.0;
    if (alt == Alternative::two_sided && c == 0.0) {
      p = 1.0;
    } else {
      auto est = integ.integrate_adaptive(lo, hi, precision);
      p = std::clamp(1.0 - est.value, 0.0, 1.0);
      out.max_error = std::max(out.max_error, est.mc_error);
      out.converged = out.converged && est.converged;
    }
    out.p[i] = p;
    cache.emplace_back(c, p);
  }
  return out;
}

inline AdjustedP adjusted_p(const std::vector<double>& tstats, const Eigen::MatrixXd& corr, double df,
                            Alternative alt, const MvtOptions& opt = {}, std::uint64_t seed = kDefaultSeed) {
  MvtIntegrator integ(corr, df, seed, opt);
  return adjusted_p(integ, tstats, alt);
}

// Unadjusted univariate p-value of one statistic.
inline double univariate_p(double t, double df, Alternative alt) {
  switch (alt) {
    case Alternative::greater: return t_sf(t, df);
    case Alternative::less: return t_cdf(t, df);
    case Alternative::two_sided: return std::min(1.0, 2.0 * t_sf(std::abs(t), df));
  }
  return 1.0;
}

}  // namespace jointmct
