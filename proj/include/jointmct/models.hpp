#pragma once

// Cell-means models: one coefficient per A x B cell, no intercept.
//   gaussian-identity: beta = cell means, V = sigma2 * diag(1/n)
//   binomial-logit:    beta = logit of (add-two adjusted) cell proportions

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jointmct/dataset.hpp"
#include "jointmct/distributions.hpp"
#include "jointmct/error.hpp"
#include "jointmct/ols.hpp"

namespace jointmct {

enum class ModelFamily { gaussian_identity, binomial_logit };

struct CellMeansFit {
  ModelFamily family = ModelFamily::gaussian_identity;
  CellLayout layout;
  Eigen::VectorXd beta;        // NaN for empty cells
  Eigen::MatrixXd vcov_model;  // zero rows/cols for empty cells
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  double df_resid = kInf;      // +inf marks the normal reference
  bool degenerate_variance = false;
  std::vector<std::string> notices;

  std::size_t n_cells() const { return layout.n_cells(); }
  bool cell_empty(std::size_t c) const { return layout.cell_n[c] <= 0; }
};

struct SandwichCovariance {
  Eigen::MatrixXd vcov_robust;
  SandwichFlavor flavor = SandwichFlavor::HC0;
};

inline CellMeansFit fit_gaussian_cell_means(const LongDataset& ds) {
  if (ds.empty()) throw ModelError("cannot fit an empty dataset");
  const auto& L = ds.layout();
  const auto summaries = summarize(ds);
  const auto N = static_cast<double>(ds.size());
  const auto used = static_cast<double>(L.nonempty_cells());
  const double df = N - used;
  if (df < 1) throw ModelError("zero residual degrees of freedom: every cell needs replication (N=" +
                               std::to_string(ds.size()) + ", cells=" + std::to_string(L.nonempty_cells()) + ")");

  CellMeansFit fit;
  fit.family = ModelFamily::gaussian_identity;
  fit.layout = L;
  const auto k = static_cast<Eigen::Index>(L.n_cells());
  fit.beta = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
  double ss = 0.0;
  auto values = ds.values_by_cell();
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& s = summaries[static_cast<std::size_t>(c)];
    if (s.n == 0) continue;
    fit.beta(c) = s.mean;
    for (double y : values[static_cast<std::size_t>(c)]) ss += (y - s.mean) * (y - s.mean);
  }
  fit.df_resid = df;
  fit.sigma2 = ss / df;
  fit.vcov_model = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index c = 0; c < k; ++c)
    if (L.cell_n[static_cast<std::size_t>(c)] > 0) fit.vcov_model(c, c) = fit.sigma2 / L.cell_n[static_cast<std::size_t>(c)];
  if (fit.sigma2 <= 0.0) {
    fit.degenerate_variance = true;
    fit.notices.push_back("residual variance is zero; standard errors are degenerate");
  }
  return fit;
}

// Closed form for the cell-means design: the sandwich is diagonal with
//   HC0: SS_c / n_c^2 = (n_c-1)/n_c * s_c^2/n_c
//   HC1: HC0 * N/(N - #cells)
//   HC3: SS_c / (n_c-1)^2 = s_c^2/(n_c-1)   (leverage 1/n_c)
inline SandwichCovariance sandwich_covariance(const LongDataset& ds, const CellMeansFit& fit,
                                              SandwichFlavor flavor = SandwichFlavor::HC0) {
  if (fit.family != ModelFamily::gaussian_identity) throw ModelError("sandwich covariance requires a gaussian fit");
  const auto& L = ds.layout();
  if (L.n_cells() != fit.n_cells()) throw ModelError("fit does not belong to this dataset");
  const auto k = static_cast<Eigen::Index>(L.n_cells());
  std::vector<double> ss(L.n_cells(), 0.0);
  for (const auto& r : ds.rows()) {
    const auto c = L.cell(r.a, r.b);
    const double e = r.response - fit.beta(static_cast<Eigen::Index>(c));
    ss[c] += e * e;
  }
  const double N = static_cast<double>(ds.size());
  const double used = static_cast<double>(L.nonempty_cells());
  SandwichCovariance out;
  out.flavor = flavor;
  out.vcov_robust = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t c = 0; c < L.n_cells(); ++c) {
    const double n = L.cell_n[c];
    if (n <= 0) continue;
    double v = 0.0;
    switch (flavor) {
      case SandwichFlavor::HC0: v = ss[c] / (n * n); break;
      case SandwichFlavor::HC1: v = ss[c] / (n * n) * N / (N - used); break;
      case SandwichFlavor::HC3:
        if (n < 2)
          throw ModelError("HC3 sandwich undefined for cell '" + L.cell_name(c) +
                           "' with a single observation (leverage 1); use HC0");
        v = ss[c] / ((n - 1.0) * (n - 1.0));
        break;
    }
    out.vcov_robust(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = v;
  }
  return out;
}

// add_two: nullopt applies the adjustment automatically when some cell is 0/n or n/n.
inline CellMeansFit fit_binomial_logit(const BinomialDataset& ds, std::optional<bool> add_two = std::nullopt) {
  const auto& L = ds.layout();
  bool degenerate = false;
  for (std::size_t c = 0; c < L.n_cells(); ++c)
    if (ds.trials(c) > 0 && (ds.successes(c) == 0 || ds.successes(c) == ds.trials(c))) degenerate = true;

  CellMeansFit fit;
  fit.family = ModelFamily::binomial_logit;
  fit.layout = L;
  const bool adjust = add_two.value_or(degenerate);
  if (!add_two && degenerate)
    fit.notices.push_back("a cell has 0 or all successes; applying the add-two adjustment");
  if (!adjust && degenerate)
    throw ModelError("a cell has 0 or all successes: the logit is infinite; enable the add-two adjustment");

  const double adj = adjust ? 1.0 : 0.0;
  const auto k = static_cast<Eigen::Index>(L.n_cells());
  fit.beta = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
  fit.vcov_model = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t c = 0; c < L.n_cells(); ++c) {
    if (ds.trials(c) <= 0) continue;
    const double s = static_cast<double>(ds.successes(c)) + adj;
    const double f = static_cast<double>(ds.trials(c) - ds.successes(c)) + adj;
    const auto i = static_cast<Eigen::Index>(c);
    fit.beta(i) = std::log(s / f);
    fit.vcov_model(i, i) = 1.0 / s + 1.0 / f;
  }
  fit.df_resid = kInf;
  return fit;
}

}  // namespace jointmct
