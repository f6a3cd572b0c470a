#pragma once

// Ordinary least squares on an explicit design matrix. Used for the additive
// two-way model (pooled analyses and the interaction pre-test) and as the
// generic residual-based sandwich route.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "jointmct/dataset.hpp"
#include "jointmct/error.hpp"

namespace jointmct {

enum class SandwichFlavor { HC0, HC1, HC3 };

inline const char* to_string(SandwichFlavor f) {
  switch (f) {
    case SandwichFlavor::HC0: return "HC0";
    case SandwichFlavor::HC1: return "HC1";
    case SandwichFlavor::HC3: return "HC3";
  }
  return "?";
}

struct OlsFit {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inv;
  double rss = 0.0;
  double df_resid = 0.0;
  Eigen::Index rank = 0;

  double sigma2() const { return rss / df_resid; }
  Eigen::MatrixXd vcov_model() const { return sigma2() * xtx_inv; }

  Eigen::VectorXd leverages() const { return (X * xtx_inv).cwiseProduct(X).rowwise().sum(); }

  // (X'X)^-1 X' diag(omega) X (X'X)^-1 with omega from squared residuals.
  Eigen::MatrixXd vcov_sandwich(SandwichFlavor flavor) const {
    const auto n = static_cast<double>(X.rows());
    const auto p = static_cast<double>(X.cols());
    Eigen::VectorXd omega = residuals.array().square();
    if (flavor == SandwichFlavor::HC1) {
      omega *= n / (n - p);
    } else if (flavor == SandwichFlavor::HC3) {
      const Eigen::VectorXd h = leverages();
      for (Eigen::Index i = 0; i < omega.size(); ++i) {
        if (1.0 - h(i) < 1e-10)
          throw ModelError("HC3 sandwich undefined: observation " + std::to_string(i + 1) +
                           " has leverage 1 (single-observation cell); use HC0");
        omega(i) /= (1.0 - h(i)) * (1.0 - h(i));
      }
    }
    const Eigen::MatrixXd meat = X.transpose() * omega.asDiagonal() * X;
    return xtx_inv * meat * xtx_inv;
  }
};

inline OlsFit fit_ols(Eigen::MatrixXd X, Eigen::VectorXd y) {
  if (X.rows() != y.size()) throw ModelError("design/response size mismatch");
  OlsFit f;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  f.rank = qr.rank();
  if (f.rank < X.cols()) throw ModelError("design matrix is rank deficient (empty cells or aliased effects)");
  f.beta = qr.solve(y);
  f.residuals = y - X * f.beta;
  f.rss = f.residuals.squaredNorm();
  f.df_resid = static_cast<double>(X.rows() - X.cols());
  if (f.df_resid < 1) throw ModelError("no residual degrees of freedom");
  f.xtx_inv = (X.transpose() * X).inverse();
  f.X = std::move(X);
  f.y = std::move(y);
  return f;
}

// Columns: intercept, primary levels 2..|A| (treatment coding), secondary levels 2..|B|.
inline Eigen::MatrixXd additive_design(const LongDataset& ds) {
  const auto na = static_cast<Eigen::Index>(ds.a_levels().size());
  const auto nb = static_cast<Eigen::Index>(ds.b_levels().size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.size()), na + nb - 1);
  Eigen::Index i = 0;
  for (const auto& r : ds.rows()) {
    X(i, 0) = 1.0;
    if (r.a > 0) X(i, static_cast<Eigen::Index>(r.a)) = 1.0;
    if (r.b > 0) X(i, na - 1 + static_cast<Eigen::Index>(r.b)) = 1.0;
    ++i;
  }
  return X;
}

// One indicator column per cell (B-major), dropping empty cells when requested.
inline Eigen::MatrixXd cell_means_design(const LongDataset& ds) {
  const auto& L = ds.layout();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(L.n_cells()));
  Eigen::Index i = 0;
  for (const auto& r : ds.rows()) X(i++, static_cast<Eigen::Index>(L.cell(r.a, r.b))) = 1.0;
  return X;
}

inline Eigen::VectorXd response_vector(const LongDataset& ds) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ds.size()));
  Eigen::Index i = 0;
  for (const auto& r : ds.rows()) y(i++) = r.response;
  return y;
}

}  // namespace jointmct
