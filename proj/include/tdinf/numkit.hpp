#pragma once

// Dense small-matrix numerics on top of Eigen storage types.
//
// Everything here is written for d <= ~10 (and d^2 x d^2 systems for the
// Kronecker/Lyapunov algebra), so the algorithms are the plain textbook
// ones: Gauss-Jordan elimination, cyclic Jacobi, dense vec-trick solves.
//
// Vectorization is row-major: vec(X)[i * cols + j] = X(i, j). Under this
// convention vec(A X B^T) = kron(A, B) vec(X).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tdinf/error.hpp"

namespace tdinf {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Random engine used throughout. State is always passed explicitly.
using Rng = std::mt19937_64;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const std::string& what) {
  if (!x.allFinite()) throw DomainError(what + ": non-finite entry");
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const std::string& what) {
  if (m.rows() != m.cols()) {
    throw ShapeError(what + ": expected a square matrix, got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
}

namespace detail {

// In-place Gauss-Jordan with partial pivoting on [M | R]. On return R holds
// M^{-1} R. `scale` is the largest row norm of the original M.
template <typename Scalar>
void gauss_jordan(MatrixX<Scalar>& m, MatrixX<Scalar>& rhs) {
  using std::abs;
  const Eigen::Index n = m.rows();
  const Scalar scale = n == 0 ? Scalar(0) : m.rowwise().norm().maxCoeff();
  const Scalar tol = Scalar(1e-12) * scale;
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (abs(m(r, col)) > abs(m(pivot, col))) pivot = r;
    }
    if (!(abs(m(pivot, col)) > tol)) {
      throw SingularError("matrix is singular to working precision (pivot " +
                          std::to_string(static_cast<double>(abs(m(pivot, col)))) + " in column " +
                          std::to_string(col) + ")");
    }
    if (pivot != col) {
      m.row(pivot).swap(m.row(col));
      rhs.row(pivot).swap(rhs.row(col));
    }
    const Scalar inv_p = Scalar(1) / m(col, col);
    m.row(col) *= inv_p;
    rhs.row(col) *= inv_p;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const Scalar f = m(r, col);
      if (f == Scalar(0)) continue;
      m.row(r) -= f * m.row(col);
      rhs.row(r) -= f * rhs.row(col);
    }
  }
}

}  // namespace detail

/// Solves M X = R by elimination with partial pivoting.
template <typename Scalar>
MatrixX<Scalar> solve_linear(const MatrixX<Scalar>& m, const MatrixX<Scalar>& rhs) {
  require_square(m, "solve_linear");
  if (rhs.rows() != m.rows()) throw ShapeError("solve_linear: right-hand side has wrong row count");
  MatrixX<Scalar> work = m;
  MatrixX<Scalar> out = rhs;
  detail::gauss_jordan(work, out);
  return out;
}

template <typename Scalar>
VectorX<Scalar> solve_linear(const MatrixX<Scalar>& m, const VectorX<Scalar>& rhs) {
  MatrixX<Scalar> r = rhs;
  return solve_linear(m, r).col(0);
}

/// Inverse by Gauss-Jordan elimination with partial pivoting. Throws
/// SingularError when a pivot falls below 1e-12 times the largest row norm.
template <typename Scalar>
MatrixX<Scalar> invert(const MatrixX<Scalar>& m) {
  require_square(m, "invert");
  return solve_linear(m, MatrixX<Scalar>(MatrixX<Scalar>::Identity(m.rows(), m.cols())));
}

template <typename Scalar>
struct SymEig {
  VectorX<Scalar> values;   // descending
  MatrixX<Scalar> vectors;  // columns, orthonormal
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations. The input is
/// symmetrized as (S + S^T) / 2 first.
template <typename Scalar>
SymEig<Scalar> sym_eig(const MatrixX<Scalar>& s) {
  using std::abs;
  using std::sqrt;
  require_square(s, "sym_eig");
  const Eigen::Index n = s.rows();
  MatrixX<Scalar> a = (s + s.transpose()) / Scalar(2);
  MatrixX<Scalar> v = MatrixX<Scalar>::Identity(n, n);

  const Scalar total = a.squaredNorm();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int sweep = 0; sweep < 100; ++sweep) {
    Scalar off = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= eps * eps * total || off == Scalar(0)) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (abs(theta) + sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  SymEig<Scalar> out{VectorX<Scalar>(n), MatrixX<Scalar>(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

template <typename Scalar>
Scalar lambda_min(const MatrixX<Scalar>& s) {
  return sym_eig(s).values.minCoeff();
}

template <typename Scalar>
Scalar lambda_max(const MatrixX<Scalar>& s) {
  return sym_eig(s).values.maxCoeff();
}

/// Spectral norm: sqrt of the largest eigenvalue of M^T M.
template <typename Scalar>
Scalar operator_norm(const MatrixX<Scalar>& m) {
  using std::sqrt;
  if (m.size() == 0) return Scalar(0);
  const MatrixX<Scalar> gram = m.transpose() * m;
  return sqrt(std::max(Scalar(0), lambda_max(gram)));
}

/// Symmetric square root Q diag(sqrt(max(l, 0))) Q^T. Eigenvalues below
/// -1e-6 ||S|| raise NotPsdError; smaller negative ones are clamped.
template <typename Scalar>
MatrixX<Scalar> psd_sqrt(const MatrixX<Scalar>& s) {
  using std::abs;
  using std::sqrt;
  const SymEig<Scalar> eig = sym_eig(s);
  const Eigen::Index n = s.rows();
  if (n == 0) return MatrixX<Scalar>(0, 0);
  const Scalar norm = eig.values.cwiseAbs().maxCoeff();
  VectorX<Scalar> root(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Scalar l = eig.values(k);
    if (l < -Scalar(1e-6) * norm) {
      throw NotPsdError("psd_sqrt: eigenvalue " + std::to_string(static_cast<double>(l)) +
                        " is negative beyond tolerance");
    }
    root(k) = l > Scalar(0) ? sqrt(l) : Scalar(0);
  }
  return eig.vectors * root.asDiagonal() * eig.vectors.transpose();
}

/// Kronecker product with block structure [X(i, j) * Y].
template <typename DerivedX, typename DerivedY>
MatrixX<typename DerivedX::Scalar> kron(const Eigen::MatrixBase<DerivedX>& x,
                                        const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  const Eigen::Index p = y.rows();
  const Eigen::Index q = y.cols();
  MatrixX<Scalar> out(x.rows() * p, x.cols() * q);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) out.block(i * p, j * q, p, q) = x(i, j) * y;
  return out;
}

/// Row-major vectorization.
template <typename Derived>
VectorX<typename Derived::Scalar> vec(const Eigen::MatrixBase<Derived>& x) {
  VectorX<typename Derived::Scalar> out(x.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) out(i * x.cols() + j) = x(i, j);
  return out;
}

/// Inverse of vec: fills rows first.
template <typename Derived>
MatrixX<typename Derived::Scalar> reshape(const Eigen::MatrixBase<Derived>& v, Eigen::Index rows,
                                          Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw ShapeError("reshape: length " + std::to_string(v.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  MatrixX<typename Derived::Scalar> out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = v(i * cols + j);
  return out;
}

/// Solves A X + X A^T = E through the d^2 x d^2 system
/// (A (x) I + I (x) A) vec(X) = vec(E). The result is symmetrized.
template <typename Scalar>
MatrixX<Scalar> solve_lyapunov(const MatrixX<Scalar>& a, const MatrixX<Scalar>& e) {
  require_square(a, "solve_lyapunov");
  if (e.rows() != a.rows() || e.cols() != a.cols())
    throw ShapeError("solve_lyapunov: E must match A");
  const Eigen::Index d = a.rows();
  const MatrixX<Scalar> eye = MatrixX<Scalar>::Identity(d, d);
  const MatrixX<Scalar> system = kron(a, eye) + kron(eye, a);
  const VectorX<Scalar> x = solve_linear(system, VectorX<Scalar>(vec(e)));
  const MatrixX<Scalar> out = reshape(x, d, d);
  return (out + out.transpose()) / Scalar(2);
}

// ---------------------------------------------------------------------------
// Scalar distributions.

/// Standard normal CDF.
double gaussian_cdf(double x);

/// Inverse of gaussian_cdf by bisection; p in (0, 1).
double gaussian_quantile(double p);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

double chi2_cdf(int dof, double x);

/// q with chi2_cdf(dof, q) = p, by bisection. p must lie in (0, 1).
double chi2_quantile(int dof, double p);

// ---------------------------------------------------------------------------
// Random variates.

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Marsaglia polar method; one variate per call, the spare is discarded.
double standard_normal(Rng& rng);

/// Fills `out` with independent standard normals.
void fill_standard_normal(Rng& rng, Eigen::Ref<Vector> out);

/// Draws from N(0, lambda) as psd_sqrt(lambda) * z.
Vector gaussian_vector(const Matrix& lambda, Rng& rng);

/// Samples repeatedly from N(0, lambda) reusing one square root.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Matrix& lambda) : root_(psd_sqrt(lambda)), z_(lambda.rows()) {}

  Vector operator()(Rng& rng) {
    fill_standard_normal(rng, z_);
    return root_ * z_;
  }

  const Matrix& root() const { return root_; }

 private:
  Matrix root_;
  Vector z_;
};

}  // namespace tdinf
