#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "tdinf/error.hpp"
#include "tdinf/numkit.hpp"

using namespace tdinf;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = 2.0 * uniform01(rng) - 1.0;
  return m;
}

// Diagonal shift keeps the symmetric part positive definite.
Matrix random_stable(Rng& rng, Eigen::Index d) {
  return random_matrix(rng, d, d) + static_cast<double>(d) * Matrix::Identity(d, d);
}

Matrix random_psd(Rng& rng, Eigen::Index d) {
  const Matrix g = random_matrix(rng, d, d);
  return g * g.transpose();
}

template <typename F>
double simpson(F f, double a, double b, int n = 200000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST(Invert, Examples) {
  const Matrix id = Matrix::Identity(3, 3);
  EXPECT_TRUE(invert(id).isApprox(id));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2, 4;
  Matrix expected = Matrix::Zero(2, 2);
  expected.diagonal() << 0.5, 0.25;
  EXPECT_TRUE(invert(d).isApprox(expected));
  Matrix rank1(2, 2);
  rank1 << 1, 2, 2, 4;
  EXPECT_THROW(invert(rank1), SingularError);
}

TEST(Invert, RandomWellConditioned) {
  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index d = 1 + k % 8;
    const Matrix m = random_stable(rng, d);
    const Matrix residual = m * invert(m) - Matrix::Identity(d, d);
    EXPECT_LE(residual.norm(), 1e-10 * static_cast<double>(d));
  }
}

TEST(Invert, RejectsNonSquare) { EXPECT_THROW(invert(Matrix(Matrix::Ones(2, 3))), ShapeError); }

TEST(SymEig, DiagonalAndTwoByTwo) {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  const auto e = sym_eig(m);
  EXPECT_NEAR(e.values(0), 3.0, 1e-12);
  EXPECT_NEAR(e.values(1), 1.0, 1e-12);
  EXPECT_NEAR(lambda_min(m), 1.0, 1e-12);
  EXPECT_NEAR(lambda_max(m), 3.0, 1e-12);
}

TEST(SymEig, MatchesEigenSolverAndReconstructs) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Matrix g = random_matrix(rng, 5, 5);
    const Matrix s = 0.5 * (g + g.transpose());
    const auto e = sym_eig(s);
    for (Eigen::Index i = 1; i < 5; ++i) EXPECT_GE(e.values(i - 1), e.values(i));
    EXPECT_LE((e.vectors.transpose() * e.vectors - Matrix::Identity(5, 5)).norm(), 1e-9);
    const Matrix back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    EXPECT_LE((back - s).norm(), 1e-10);

    Eigen::SelfAdjointEigenSolver<Matrix> oracle(s);
    const Vector ascending = oracle.eigenvalues();
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(e.values(i), ascending(4 - i), 1e-10);
  }
}

TEST(OperatorNorm, Examples) {
  Matrix m(2, 2);
  m << 3, 0, 0, -4;
  EXPECT_NEAR(operator_norm(m), 4.0, 1e-12);
  Matrix r(1, 2);
  r << 3, 4;
  EXPECT_NEAR(operator_norm(r), 5.0, 1e-12);
}

TEST(PsdSqrt, SquaresBackAndClamps) {
  Rng rng(5);
  const Matrix s = random_psd(rng, 4);
  const Matrix root = psd_sqrt(s);
  EXPECT_LE((root * root - s).norm(), 1e-10 * s.norm());

  Matrix tiny(2, 2);
  tiny << 1, 0, 0, -1e-12;
  EXPECT_NO_THROW(psd_sqrt(tiny));
  Matrix bad(2, 2);
  bad << 1, 0, 0, -0.5;
  EXPECT_THROW(psd_sqrt(bad), NotPsdError);
  EXPECT_TRUE(psd_sqrt(Matrix(Matrix::Zero(3, 3))).isZero());
}

TEST(Kron, BlockLayout) {
  Matrix x(2, 2), y(2, 2);
  x << 1, 2, 3, 4;
  y << 0, 1, 1, 0;
  const Matrix k = kron(x, y);
  ASSERT_EQ(k.rows(), 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_TRUE(k.block(2 * i, 2 * j, 2, 2).isApprox(x(i, j) * y));
}

TEST(Vec, RowMajorRoundTrip) {
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  const Vector v = vec(x);
  EXPECT_EQ(v, (Vector(4) << 1, 2, 3, 4).finished());
  EXPECT_EQ(reshape(v, 2, 2), x);
  EXPECT_THROW(reshape(v, 3, 2), ShapeError);
}

TEST(Vec, KroneckerIdentityRandomized) {
  Rng rng(17);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index m = 1 + k % 4, n = 1 + (k / 4) % 3, p = 1 + (k / 12) % 3, q = 1 + (k / 36) % 3;
    const Matrix a = random_matrix(rng, m, n);
    const Matrix x = random_matrix(rng, n, q);
    const Matrix b = random_matrix(rng, p, q);
    const Vector lhs = vec(Matrix(a * x * b.transpose()));
    const Vector rhs = kron(a, b) * vec(x);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * std::max(1.0, lhs.norm()));
  }
}

TEST(Lyapunov, Examples) {
  const Matrix id = Matrix::Identity(3, 3);
  EXPECT_TRUE(solve_lyapunov(id, Matrix(2.0 * id)).isApprox(id));
  Matrix a = Matrix::Zero(2, 2), e = Matrix::Zero(2, 2), x = Matrix::Zero(2, 2);
  a.diagonal() << 1, 2;
  e.diagonal() << 2, 8;
  x.diagonal() << 1, 2;
  EXPECT_TRUE(solve_lyapunov(a, e).isApprox(x, 1e-12));
}

TEST(Lyapunov, RandomResiduals) {
  Rng rng(23);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index d = 1 + k % 5;
    const Matrix a = random_stable(rng, d);
    const Matrix e = random_psd(rng, d);
    const Matrix x = solve_lyapunov(a, e);
    EXPECT_EQ(x, x.transpose());
    EXPECT_LE((a * x + x * a.transpose() - e).norm(), 1e-9 * e.norm());
  }
}

TEST(GaussianCdf, SymmetryMonotonicityAndQuadrature) {
  EXPECT_DOUBLE_EQ(gaussian_cdf(0.0), 0.5);
  double prev = 0.0;
  for (double x = -8.0; x <= 8.0; x += 0.01) {
    const double f = gaussian_cdf(x);
    EXPECT_GE(f, prev);
    EXPECT_NEAR(f + gaussian_cdf(-x), 1.0, 1e-12);
    prev = f;
  }
  const double pi = std::acos(-1.0);
  const double integral =
      0.5 + simpson([&](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * pi); }, 0.0, 1.959964);
  EXPECT_NEAR(gaussian_cdf(1.959964), integral, 1e-10);
  EXPECT_NEAR(gaussian_cdf(1.959964), 0.975, 1e-6);
  EXPECT_NEAR(gaussian_quantile(0.975), 1.959964, 1e-5);
}

TEST(Chi2, Quantiles) {
  EXPECT_NEAR(chi2_quantile(2, 0.95), -2.0 * std::log(0.05), 1e-6);
  const double z = gaussian_quantile(0.975);
  EXPECT_NEAR(chi2_quantile(1, 0.95), z * z, 1e-5);
  EXPECT_NEAR(chi2_quantile(1, 0.95), 3.841459, 1e-5);

  // chi2(3) density integrated directly.
  const double pi = std::acos(-1.0);
  const double q3 = chi2_quantile(3, 0.95);
  const double mass = simpson([&](double x) { return std::sqrt(x) * std::exp(-x / 2) / std::sqrt(2 * pi); },
                              0.0, q3);
  EXPECT_NEAR(mass, 0.95, 1e-6);
  EXPECT_NEAR(q3, 7.8147, 1e-3);

  EXPECT_THROW(chi2_quantile(2, 0.0), DomainError);
  EXPECT_THROW(chi2_quantile(2, 1.0), DomainError);
}

TEST(Chi2, MonotoneInLevelAndDof) {
  for (int d = 1; d <= 6; ++d) {
    double prev = 0.0;
    for (double p = 0.05; p < 1.0; p += 0.05) {
      const double q = chi2_quantile(d, p);
      EXPECT_GT(q, prev);
      prev = q;
      EXPECT_NEAR(chi2_cdf(d, q), p, 1e-8);
    }
    EXPECT_LT(chi2_quantile(d, 0.9), chi2_quantile(d + 1, 0.9));
  }
}

TEST(Sampler, StandardNormalMoments) {
  Rng rng(99);
  Matrix id = Matrix::Identity(2, 2);
  Matrix cov = Matrix::Zero(2, 2);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const Vector z = gaussian_vector(id, rng);
    cov += z * z.transpose();
  }
  cov /= n;
  EXPECT_LE((cov - id).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Sampler, CorrelatedCovariance) {
  Rng rng(7);
  Matrix lambda(2, 2);
  lambda << 2.0, 0.6, 0.6, 0.5;
  Matrix cov = Matrix::Zero(2, 2);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const Vector z = gaussian_vector(lambda, rng);
    cov += z * z.transpose();
  }
  cov /= n;
  EXPECT_LE(((cov - lambda).array() / lambda.array()).abs().maxCoeff(), 0.01);
}

TEST(Sampler, ZeroCovarianceAndDeterminism) {
  Rng rng(1);
  EXPECT_TRUE(gaussian_vector(Matrix::Zero(3, 3), rng).isZero());
  Rng r1(42), r2(42);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(standard_normal(r1), standard_normal(r2));
}

TEST(Finite, RejectsNaN) {
  Vector v(2);
  v << 1.0, std::nan("");
  EXPECT_FALSE(all_finite(v));
  EXPECT_THROW(require_finite(v, "v"), DomainError);
}
