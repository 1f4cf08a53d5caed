#include "tdinf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tdinf/json_util.hpp"

namespace tdinf {

namespace {

void check_common(const Vector& theta_bar, const Matrix& lambda_hat, long T, double delta) {
  if (T < 1) throw DomainError("confidence region: T must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("confidence region: delta must lie in (0, 1)");
  if (lambda_hat.rows() != theta_bar.size() || lambda_hat.cols() != theta_bar.size())
    throw ShapeError("confidence region: Lambda_hat does not match theta_bar");
}

void check_dim(Eigen::Index expected, const Vector& theta) {
  if (theta.size() != expected) throw ShapeError("contains: dimension mismatch");
}

}  // namespace

LinfQuantileSampler::LinfQuantileSampler(Eigen::Index d, long n_sims, Rng& rng) {
  if (n_sims < 100) throw DomainError("linf_quantile: n_sims must be at least 100");
  z_.resize(d, n_sims);
  for (long k = 0; k < n_sims; ++k) fill_standard_normal(rng, z_.col(k));
}

double LinfQuantileSampler::quantile(const Matrix& lambda, double delta) const {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("linf_quantile: delta must lie in (0, 1)");
  if (lambda.rows() != z_.rows()) throw ShapeError("linf_quantile: covariance dimension mismatch");
  const Matrix root = psd_sqrt(lambda);
  const Matrix draws = root * z_;
  std::vector<double> norms(static_cast<std::size_t>(z_.cols()));
  for (Eigen::Index k = 0; k < z_.cols(); ++k)
    norms[static_cast<std::size_t>(k)] = z_.rows() == 0 ? 0.0 : draws.col(k).cwiseAbs().maxCoeff();
  const auto n = static_cast<double>(norms.size());
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - delta) * n));
  rank = std::clamp<std::size_t>(rank, 1, norms.size());
  std::nth_element(norms.begin(), norms.begin() + static_cast<std::ptrdiff_t>(rank - 1), norms.end());
  return norms[rank - 1];
}

double linf_quantile(const Matrix& lambda, double delta, long n_sims, Rng& rng) {
  require_square(lambda, "linf_quantile");
  return LinfQuantileSampler(lambda.rows(), n_sims, rng).quantile(lambda, delta);
}

HyperrectRegion simultaneous_ci(const Vector& theta_bar, const Matrix& lambda_hat, long T, double delta,
                                const LinfQuantileSampler& sampler) {
  check_common(theta_bar, lambda_hat, T, delta);
  const double r = sampler.quantile(lambda_hat, delta);
  HyperrectRegion out;
  out.center = theta_bar;
  out.half_widths = Vector::Constant(theta_bar.size(), r / std::sqrt(static_cast<double>(T)));
  out.T = T;
  out.delta = delta;
  out.simultaneous = true;
  return out;
}

HyperrectRegion simultaneous_ci(const Vector& theta_bar, const Matrix& lambda_hat, long T, double delta,
                                long n_sims, Rng& rng) {
  check_common(theta_bar, lambda_hat, T, delta);
  return simultaneous_ci(theta_bar, lambda_hat, T, delta, LinfQuantileSampler(theta_bar.size(), n_sims, rng));
}

HyperrectRegion individual_ci(const Vector& theta_bar, const Matrix& lambda_hat, long T, double delta) {
  check_common(theta_bar, lambda_hat, T, delta);
  const double z = gaussian_quantile(1.0 - delta / 2.0);
  HyperrectRegion out;
  out.center = theta_bar;
  out.half_widths.resize(theta_bar.size());
  for (Eigen::Index j = 0; j < theta_bar.size(); ++j) {
    const double v = lambda_hat(j, j);
    if (v < -1e-10) throw NotPsdError("individual_ci: negative variance on the diagonal");
    out.half_widths(j) = z * std::sqrt(std::max(v, 0.0) / static_cast<double>(T));
  }
  out.T = T;
  out.delta = delta;
  out.simultaneous = false;
  return out;
}

EllipsoidRegion ellipsoid_region(const Vector& theta_bar, const Matrix& lambda_hat, long T, double delta) {
  check_common(theta_bar, lambda_hat, T, delta);
  EllipsoidRegion out;
  out.center = theta_bar;
  const Matrix precision = invert(lambda_hat);
  out.precision = (precision + precision.transpose()) / 2.0;
  out.radius = chi2_quantile(static_cast<int>(theta_bar.size()), 1.0 - delta);
  out.T = T;
  out.delta = delta;
  return out;
}

bool contains_coordinate(const HyperrectRegion& region, const Vector& theta, Eigen::Index j) {
  check_dim(region.center.size(), theta);
  return std::abs(theta(j) - region.center(j)) <= region.half_widths(j);
}

bool contains(const HyperrectRegion& region, const Vector& theta) {
  check_dim(region.center.size(), theta);
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    if (!(std::abs(theta(j) - region.center(j)) <= region.half_widths(j))) return false;
  return true;
}

double ellipsoid_statistic(const EllipsoidRegion& region, const Vector& theta) {
  check_dim(region.center.size(), theta);
  const Vector diff = theta - region.center;
  return static_cast<double>(region.T) * diff.dot(region.precision * diff);
}

bool contains(const EllipsoidRegion& region, const Vector& theta) {
  return ellipsoid_statistic(region, theta) <= region.radius;
}

nlohmann::json to_json(const HyperrectRegion& r) {
  return {{"shape", r.simultaneous ? "simultaneous" : "individual"},
          {"center", entries_json(r.center)},
          {"half_widths", entries_json(r.half_widths)},
          {"T", r.T},
          {"delta", r.delta}};
}

nlohmann::json to_json(const EllipsoidRegion& r) {
  return {{"shape", "ellipsoid"},
          {"center", entries_json(r.center)},
          {"precision", rows_json(r.precision)},
          {"radius", r.radius},
          {"T", r.T},
          {"delta", r.delta}};
}

}  // namespace tdinf
