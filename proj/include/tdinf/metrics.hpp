#pragma once

#include <span>
#include <vector>

#include "tdinf/inference.hpp"
#include "tdinf/numkit.hpp"

namespace tdinf {

/// max_j sup_x |F_j(x) - Phi(x / sqrt(Lambda_jj))| over the empirical CDFs
/// of each coordinate of `samples` (one sample per row, M x d). The sup is
/// taken over both one-sided limits at every order statistic.
double ks_distance(const Matrix& samples, const Matrix& lambda_star);

/// Upper empirical quantile: the ceil(p * M)-th smallest value (1-based).
double empirical_quantile(std::span<const double> values, double p);

/// Fraction of regions containing theta_star.
template <typename Region>
double coverage_rate(std::span<const Region> regions, const Vector& theta_star) {
  if (regions.empty()) throw DomainError("coverage_rate: no regions");
  long hits = 0;
  for (const Region& r : regions) hits += contains(r, theta_star) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(regions.size());
}

/// ||Lambda_hat - Lambda_star||_F, or its square.
double frobenius_error(const Matrix& lambda_hat, const Matrix& lambda_star, bool squared = false);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> xs, std::span<const double> ys);

}  // namespace tdinf
