#include "tdinf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tdinf {

double ks_distance(const Matrix& samples, const Matrix& lambda_star) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index d = samples.cols();
  if (m < 10) throw DomainError("ks_distance: at least 10 samples are required");
  if (lambda_star.rows() != d || lambda_star.cols() != d) throw ShapeError("ks_distance: Lambda* dimension mismatch");

  const double inv_m = 1.0 / static_cast<double>(m);
  double worst = 0.0;
  std::vector<double> x(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var = lambda_star(j, j);
    if (!(var > 0.0)) throw DomainError("ks_distance: Lambda*_jj must be positive");
    const double sd = std::sqrt(var);
    for (Eigen::Index i = 0; i < m; ++i) x[static_cast<std::size_t>(i)] = samples(i, j);
    std::sort(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double f = gaussian_cdf(x[i] / sd);
      const double above = static_cast<double>(i + 1) * inv_m - f;
      const double below = f - static_cast<double>(i) * inv_m;
      worst = std::max({worst, above, below});
    }
  }
  return worst;
}

double empirical_quantile(std::span<const double> values, double p) {
  if (values.empty()) throw DomainError("empirical_quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("empirical_quantile: p must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return v[rank - 1];
}

double frobenius_error(const Matrix& lambda_hat, const Matrix& lambda_star, bool squared) {
  if (lambda_hat.rows() != lambda_star.rows() || lambda_hat.cols() != lambda_star.cols())
    throw ShapeError("frobenius_error: shape mismatch");
  const double sq = (lambda_hat - lambda_star).squaredNorm();
  return squared ? sq : std::sqrt(sq);
}

double loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("loglog_slope: xs and ys differ in length");
  if (xs.size() < 2) throw DomainError("loglog_slope: at least two points are required");
  double sx = 0, sy = 0;
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw DomainError("loglog_slope: values must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double n = static_cast<double>(xs.size());
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("loglog_slope: x values must not all coincide");
  return sxy / sxx;
}

}  // namespace tdinf
