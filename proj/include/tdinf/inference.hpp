#pragma once

// Confidence regions for theta* built from (theta_bar_T, Lambda_hat_T):
//   * simultaneous hyperrectangle, half-width R / sqrt(T) with R the
//     (1 - delta) quantile of ||N(0, Lambda_hat)||_inf (simulated);
//   * per-coordinate intervals z_{1-delta/2} sqrt(Lambda_hat_jj / T);
//   * ellipsoid T (theta - c)^T Lambda_hat^{-1} (theta - c) <= chi2_d(1 - delta).
// All regions are closed.

#include <string>

#include <json.hpp>

#include "tdinf/numkit.hpp"

namespace tdinf {

struct HyperrectRegion {
  Vector center;
  Vector half_widths;
  long T = 1;
  double delta = 0.05;
  bool simultaneous = true;
};

struct EllipsoidRegion {
  Vector center;
  Matrix precision;  // Lambda_hat^{-1}
  double radius = 0;
  long T = 1;
  double delta = 0.05;
};

/// Draws an n_sims x d block of standard normals once and reuses it to
/// evaluate l_inf quantiles for any covariance of matching dimension.
class LinfQuantileSampler {
 public:
  LinfQuantileSampler(Eigen::Index d, long n_sims, Rng& rng);

  /// Order statistic ceil((1 - delta) n_sims) of ||psd_sqrt(Lambda) z||_inf.
  double quantile(const Matrix& lambda, double delta) const;

  long n_sims() const { return static_cast<long>(z_.cols()); }

 private:
  Matrix z_;  // d x n_sims
};

double linf_quantile(const Matrix& lambda, double delta, long n_sims, Rng& rng);

HyperrectRegion simultaneous_ci(const Vector& theta_bar, const Matrix& lambda_hat, long T, double delta,
                                long n_sims, Rng& rng);
/// Same region with the quantile taken from a shared sampler.
HyperrectRegion simultaneous_ci(const Vector& theta_bar, const Matrix& lambda_hat, long T, double delta,
                                const LinfQuantileSampler& sampler);

HyperrectRegion individual_ci(const Vector& theta_bar, const Matrix& lambda_hat, long T, double delta);

EllipsoidRegion ellipsoid_region(const Vector& theta_bar, const Matrix& lambda_hat, long T, double delta);

bool contains(const HyperrectRegion& region, const Vector& theta);
/// Whether coordinate j alone lies in its interval.
bool contains_coordinate(const HyperrectRegion& region, const Vector& theta, Eigen::Index j);
bool contains(const EllipsoidRegion& region, const Vector& theta);

/// T (theta - c)^T P (theta - c).
double ellipsoid_statistic(const EllipsoidRegion& region, const Vector& theta);

nlohmann::json to_json(const HyperrectRegion& region);
nlohmann::json to_json(const EllipsoidRegion& region);

}  // namespace tdinf
