#pragma once

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "jointmct/jointmct.hpp"

namespace testsupport {

inline const nlohmann::json& oracle() {
  static const nlohmann::json j = [] {
    std::ifstream in(std::string(JOINTMCT_TEST_DATA) + "/demo_oracle.json");
    return nlohmann::json::parse(in);
  }();
  return j;
}

inline std::vector<double> vec(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

inline jointmct::LongDataset demo() { return jointmct::load_long_fixture("demo"); }

// Random correlation matrix of rank <= q from a q x q Gaussian factor.
inline Eigen::MatrixXd random_corr(std::size_t q, std::mt19937_64& rng, std::size_t rank = 0) {
  if (rank == 0) rank = q;
  std::normal_distribution<double> z;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(rank));
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = z(rng);
  Eigen::MatrixXd S = A * A.transpose();
  Eigen::VectorXd d = S.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd C = d.asDiagonal() * S * d.asDiagonal();
  C.diagonal().setOnes();
  return C;
}

// Plain Monte Carlo estimate of P(lower <= T <= upper); returns {p, se}.
inline std::pair<double, double> naive_mvt(const Eigen::MatrixXd& corr, double df, const Eigen::VectorXd& lower,
                                           const Eigen::VectorXd& upper, std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::chi_squared_distribution<double> chi(std::isinf(df) ? 1.0 : df);
  Eigen::LLT<Eigen::MatrixXd> llt(corr + 1e-12 * Eigen::MatrixXd::Identity(corr.rows(), corr.cols()));
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::VectorXd x(corr.rows());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = z(rng);
    Eigen::VectorXd t = L * x;
    if (!std::isinf(df)) t /= std::sqrt(chi(rng) / df);
    bool in = true;
    for (Eigen::Index k = 0; k < t.size() && in; ++k) in = t(k) >= lower(k) && t(k) <= upper(k);
    hit += in;
  }
  const double p = static_cast<double>(hit) / static_cast<double>(draws);
  return {p, std::sqrt(p * (1 - p) / static_cast<double>(draws))};
}

inline jointmct::LongDataset make_dataset(const std::vector<std::vector<std::vector<double>>>& by_b_then_a,
                                          std::vector<std::string> a_levels, std::vector<std::string> b_levels) {
  std::vector<jointmct::Observation> obs;
  for (std::size_t b = 0; b < by_b_then_a.size(); ++b)
    for (std::size_t a = 0; a < by_b_then_a[b].size(); ++a)
      for (double y : by_b_then_a[b][a]) obs.push_back({y, a, b});
  return jointmct::LongDataset(std::move(a_levels), std::move(b_levels), std::move(obs), true);
}

}  // namespace testsupport
