#pragma once

// Rank-based relative effects p(x, y) = P(X < Y) + 1/2 P(X = Y) with
// placement (Brunner-Munzel type) variance estimators, and joint multiple
// contrast tests on the probit scale.
//
// A contrast row with negative part c- and positive part c+ (each summing to
// one in absolute value) defines the effect sum_{i,j} c-_i c+_j p(cell_i, cell_j),
// i.e. a weighted mix of pairwise effects. The covariance of all pairwise
// estimates comes from their asymptotic linear representation in the
// placements; the delta method carries it to the probit scale.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "jointmct/contrasts.hpp"
#include "jointmct/dataset.hpp"
#include "jointmct/distributions.hpp"
#include "jointmct/error.hpp"
#include "jointmct/inference.hpp"

namespace jointmct {

struct RelativeEffect {
  double estimate = 0.5;
  double variance = 0.0;
};

namespace detail {

// Normalized placements: F_x(y_l) = mean_k score(x_k, y_l).
inline std::vector<double> placements(std::span<const double> of, std::span<const double> at) {
  std::vector<double> sorted(of.begin(), of.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(at.size());
  const double n = static_cast<double>(sorted.size());
  for (double y : at) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), y);
    const auto hi = std::upper_bound(lo, sorted.end(), y);
    out.push_back((static_cast<double>(lo - sorted.begin()) + 0.5 * static_cast<double>(hi - lo)) / n);
  }
  return out;
}

inline double continuity_adjust(double p, double nx, double ny) {
  const double eps = 1.0 / (2.0 * nx * ny);
  if (p <= 0.0) return eps;
  if (p >= 1.0) return 1.0 - eps;
  return p;
}

// Used when all placements are constant (complete separation or all ties):
// a binomial-type bound at the continuity-corrected estimate.
inline double variance_floor(double p, double nx, double ny) { return p * (1.0 - p) / (nx * ny); }

}  // namespace detail

// Effect of y relative to x: values > 1/2 mean y tends to be larger.
inline RelativeEffect relative_effect(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw ModelError("relative effect needs two non-empty samples");
  if (x.size() < 2 || y.size() < 2) throw ModelError("relative effect variance needs at least 2 observations per sample");
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  const auto fx_at_y = detail::placements(x, y);  // F_x(y_l)
  const auto fy_at_x = detail::placements(y, x);  // F_y(x_k)
  double p = 0.0;
  for (double v : fx_at_y) p += v;
  p /= ny;
  double vy = 0.0, vx = 0.0;
  for (double v : fx_at_y) vy += (v - p) * (v - p);
  for (double v : fy_at_x) vx += (v - (1.0 - p)) * (v - (1.0 - p));
  vy /= (ny - 1.0);
  vx /= (nx - 1.0);
  RelativeEffect r;
  r.estimate = detail::continuity_adjust(p, nx, ny);
  r.variance = vy / ny + vx / nx;
  if (r.variance <= 0.0) r.variance = detail::variance_floor(r.estimate, nx, ny);
  return r;
}

struct RelativeEffectFit {
  std::vector<std::string> labels;
  std::vector<RowTag> tags;
  Eigen::VectorXd effects;      // (0, 1)
  Eigen::VectorXd transformed;  // probit scale
  Eigen::MatrixXd vcov_effects;
  Eigen::MatrixXd vcov_probit;
  std::vector<double> n_per_cell;
};

// Effects and their covariance for every row of a joint contrast matrix over cells.
inline RelativeEffectFit fit_relative_effects(const LongDataset& ds, const ContrastMatrix& cm) {
  const auto& L = ds.layout();
  check_against_layout(cm, L);
  const auto groups = ds.values_by_cell();
  const auto q = cm.rows();

  // pairs (i -> j) with weights per row
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair_index;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::vector<std::pair<std::size_t, double>>> row_weights(static_cast<std::size_t>(q));
  for (Eigen::Index r = 0; r < q; ++r) {
    double pos = 0.0, neg = 0.0;
    for (Eigen::Index c = 0; c < cm.cols(); ++c) (cm.coef(r, c) > 0 ? pos : neg) += cm.coef(r, c);
    if (std::abs(pos - 1.0) > 1e-9 || std::abs(neg + 1.0) > 1e-9)
      throw ModelError("contrast '" + cm.labels[static_cast<std::size_t>(r)] +
                       "' is not expressible as weighted two-group comparisons (positive and negative parts must "
                       "sum to +1 and -1)");
    for (Eigen::Index i = 0; i < cm.cols(); ++i) {
      if (!(cm.coef(r, i) < 0)) continue;
      for (Eigen::Index j = 0; j < cm.cols(); ++j) {
        if (!(cm.coef(r, j) > 0)) continue;
        const auto key = std::make_pair(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        auto [it, inserted] = pair_index.try_emplace(key, pairs.size());
        if (inserted) pairs.push_back(key);
        row_weights[static_cast<std::size_t>(r)].emplace_back(it->second, -cm.coef(r, i) * cm.coef(r, j));
      }
    }
  }
  for (const auto& [i, j] : pairs)
    if (groups[i].size() < 2 || groups[j].size() < 2)
      throw ModelError("cells '" + L.cell_name(i) + "' and '" + L.cell_name(j) +
                       "' need at least 2 observations each for rank-based variances");

  // pairwise estimates and their influence values per observation
  const auto P = static_cast<Eigen::Index>(pairs.size());
  Eigen::VectorXd phat(P);
  // influence[s] is (n_s x P): contribution of observation m in cell s to pair estimate
  std::vector<Eigen::MatrixXd> influence(L.n_cells());
  for (std::size_t s = 0; s < L.n_cells(); ++s)
    influence[s] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups[s].size()), P);
  for (Eigen::Index k = 0; k < P; ++k) {
    const auto [i, j] = pairs[static_cast<std::size_t>(k)];
    const auto fi_at_j = detail::placements(groups[i], groups[j]);
    const auto fj_at_i = detail::placements(groups[j], groups[i]);
    double p = 0.0;
    for (double v : fi_at_j) p += v;
    p /= static_cast<double>(fi_at_j.size());
    phat(k) = p;
    for (std::size_t m = 0; m < fi_at_j.size(); ++m) influence[j](static_cast<Eigen::Index>(m), k) = fi_at_j[m] - p;
    for (std::size_t m = 0; m < fj_at_i.size(); ++m)
      influence[i](static_cast<Eigen::Index>(m), k) = -(fj_at_i[m] - (1.0 - p));
  }
  Eigen::MatrixXd Vp = Eigen::MatrixXd::Zero(P, P);
  for (std::size_t s = 0; s < L.n_cells(); ++s) {
    const double n = static_cast<double>(groups[s].size());
    if (n < 2) continue;
    Vp += influence[s].transpose() * influence[s] / ((n - 1.0) * n);
  }

  RelativeEffectFit fit;
  fit.labels = cm.labels;
  fit.tags = cm.tags;
  fit.n_per_cell = L.cell_n;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(q, P);
  for (Eigen::Index r = 0; r < q; ++r)
    for (const auto& [k, w] : row_weights[static_cast<std::size_t>(r)]) W(r, static_cast<Eigen::Index>(k)) += w;
  fit.effects = W * phat;
  fit.vcov_effects = W * Vp * W.transpose();
  fit.transformed.resize(q);
  Eigen::VectorXd jac(q);
  for (Eigen::Index r = 0; r < q; ++r) {
    // sample sizes on each side of the row, for the continuity correction
    double nx = 0.0, ny = 0.0;
    for (Eigen::Index c = 0; c < cm.cols(); ++c) {
      if (cm.coef(r, c) < 0) nx += L.cell_n[static_cast<std::size_t>(c)];
      if (cm.coef(r, c) > 0) ny += L.cell_n[static_cast<std::size_t>(c)];
    }
    fit.effects(r) = detail::continuity_adjust(fit.effects(r), nx, ny);
    if (!(fit.vcov_effects(r, r) > 0.0)) fit.vcov_effects(r, r) = detail::variance_floor(fit.effects(r), nx, ny);
    fit.transformed(r) = norm_quantile(fit.effects(r));
    jac(r) = 1.0 / norm_pdf(fit.transformed(r));
  }
  fit.vcov_probit = jac.asDiagonal() * fit.vcov_effects * jac.asDiagonal();
  return fit;
}

// Probit-scale statistics tested against p = 1/2 with a multivariate normal
// reference. Estimates and intervals are reported on the effect scale.
inline JointResult run_joint_nonpar(const LongDataset& ds, const ContrastMatrix& cm, const JointTestOptions& opt) {
  const auto fit = fit_relative_effects(ds, cm);
  auto res = joint_from_estimates(fit.transformed, fit.vcov_probit, kInf, fit.labels, fit.tags, opt, "rank-placement");
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    auto& r = res.rows[i];
    r.estimate = fit.effects(static_cast<Eigen::Index>(i));
    r.se = std::sqrt(fit.vcov_effects(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    r.sci_lower = std::isinf(r.sci_lower) ? 0.0 : norm_cdf(r.sci_lower);
    r.sci_upper = std::isinf(r.sci_upper) ? 1.0 : norm_cdf(r.sci_upper);
  }
  res.scale = "relative-effect";
  return res;
}

}  // namespace jointmct
