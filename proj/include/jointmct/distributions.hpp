#pragma once

// Univariate reference distributions. df = +inf selects the normal limit.

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace jointmct {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_infinite_df(double df) { return std::isinf(df) || df > 1e12; }

inline double norm_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.398942280401432677939946059934;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return 0.5 * std::erfc(-x * 0.707106781186547524400844362105);
}

// Upper tail 1 - Phi(x) without cancellation.
inline double norm_sf(double x) { return norm_cdf(-x); }

inline double norm_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return -1.41421356237309504880168872421 * boost::math::erfc_inv(2.0 * p);
}

inline double t_cdf(double x, double df) {
  if (is_infinite_df(df)) return norm_cdf(x);
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return boost::math::cdf(boost::math::students_t_distribution<double>(df), x);
}

inline double t_sf(double x, double df) {
  if (is_infinite_df(df)) return norm_sf(x);
  if (x == kInf) return 0.0;
  if (x == -kInf) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), x));
}

inline double t_quantile(double p, double df) {
  if (is_infinite_df(df)) return norm_quantile(p);
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

// sqrt(chi2_df / df) at probability p; scales bounds when integrating the
// multivariate t as a normal mixture.
inline double chi_scale_quantile(double p, double df) {
  if (is_infinite_df(df)) return 1.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return kInf;
  const double x = p > 0.5 ? 2.0 * boost::math::gamma_q_inv(0.5 * df, 1.0 - p) : 2.0 * boost::math::gamma_p_inv(0.5 * df, p);
  return std::sqrt(x / df);
}

// Same quantity at p = Phi(z), accurate in both tails.
inline double chi_scale_at_normal_score(double z, double df) {
  if (is_infinite_df(df)) return 1.0;
  const double x = z > 0.0 ? 2.0 * boost::math::gamma_q_inv(0.5 * df, norm_cdf(-z))
                           : 2.0 * boost::math::gamma_p_inv(0.5 * df, norm_cdf(z));
  return std::sqrt(x / df);
}

// Cubic Hermite table of chi_scale_at_normal_score on z in [-8, 8]. Relative
// error is about 2e-9 at df = 1 and shrinks quickly as df grows.
// Values outside the grid fall back to the exact quantile.
class ChiScaleTable {
 public:
  explicit ChiScaleTable(double df) : df_(df), s_(kNodes + 1), ds_(kNodes + 1) {
    for (int i = 0; i <= kNodes; ++i) {
      const double z = kZmin + i * kStep;
      const double s = chi_scale_at_normal_score(z, df);
      const double x = s * s * df;
      const double dens = 0.5 * boost::math::gamma_p_derivative(0.5 * df, 0.5 * x);
      s_[i] = s;
      ds_[i] = norm_pdf(z) / (dens * 2.0 * std::sqrt(x * df)) * kStep;
    }
  }

  double df() const { return df_; }

  double at_score(double z) const {
    const double u = (z - kZmin) / kStep;
    if (!(u >= 0.0) || u >= kNodes) return chi_scale_at_normal_score(z, df_);
    const int i = static_cast<int>(u);
    const double t = u - i, t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * s_[i] + (t3 - 2 * t2 + t) * ds_[i] + (-2 * t3 + 3 * t2) * s_[i + 1] +
           (t3 - t2) * ds_[i + 1];
  }

  double operator()(double p) const {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return kInf;
    return at_score(norm_quantile(p));
  }

  // Shared per-df instance.
  static std::shared_ptr<const ChiScaleTable> get(double df) {
    static std::mutex mu;
    static std::map<double, std::shared_ptr<const ChiScaleTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[df];
    if (!slot) slot = std::make_shared<const ChiScaleTable>(df);
    return slot;
  }

 private:
  static constexpr int kNodes = 4096;
  static constexpr double kZmin = -8.0;
  static constexpr double kStep = 16.0 / kNodes;
  double df_;
  std::vector<double> s_, ds_;
};

inline double f_sf(double x, double df1, double df2) {
  if (!(x > 0.0)) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<double>(df1, df2), x));
}

}  // namespace jointmct
