#include "tdinf/covest.hpp"

#include "tdinf/json_util.hpp"

namespace tdinf {

MomentAccumulator::MomentAccumulator(Eigen::Index d)
    : d_(d),
      a_bar_(Matrix::Zero(d, d)),
      aa_bar_(Matrix::Zero(d * d, d * d)),
      ab_bar_(Matrix::Zero(d * d, d)),
      bb_bar_(Vector::Zero(d * d)),
      scratch_a_(d, d),
      scratch_b_(d) {
  if (d < 1) throw DomainError("MomentAccumulator: dimension must be positive");
}

void MomentAccumulator::update(const Matrix& a, const Vector& b) {
  if (a.rows() != d_ || a.cols() != d_ || b.size() != d_)
    throw ShapeError("MomentAccumulator::update: dimension mismatch");
  update_from(a, b);
}

void MomentAccumulator::update_features(const Eigen::Ref<const Vector>& phi,
                                        const Eigen::Ref<const Vector>& phi_next, double gamma,
                                        double reward) {
  scratch_a_.noalias() = phi * (phi - gamma * phi_next).transpose();
  scratch_b_.noalias() = reward * phi;
  update_from(scratch_a_, scratch_b_);
}

// Index maps for the Kronecker blocks (row-major vec):
//   (A (x) A)(i*d + k, j*d + l) = A(i, j) A(k, l)
//   (A (x) b)(i*d + k, j)       = A(i, j) b(k)
//   (b (x) A)(i*d + k, j)       = b(i) A(k, j)
//   (b (x) b)(i*d + k)          = b(i) b(k)
void MomentAccumulator::update_from(const Matrix& a, const Vector& b) {
  ++n_;
  const double w = 1.0 / static_cast<double>(n_);
  const Eigen::Index d = d_;
  a_bar_ += w * (a - a_bar_);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index l = 0; l < d; ++l) {
      const Eigen::Index col = j * d + l;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double aij = a(i, j);
        for (Eigen::Index k = 0; k < d; ++k) {
          double& m = aa_bar_(i * d + k, col);
          m += w * (aij * a(k, l) - m);
        }
      }
    }
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) {
        double& m = ab_bar_(i * d + k, j);
        m += w * (a(i, j) * b(k) + b(i) * a(k, j) - m);
      }
    }
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      double& m = bb_bar_(i * d + k);
      m += w * (b(i) * b(k) - m);
    }
  }
}

Matrix MomentAccumulator::gamma_hat(const Vector& theta_bar) const {
  if (n_ < 1) throw DomainError("MomentAccumulator: no samples accumulated");
  if (theta_bar.size() != d_) throw ShapeError("MomentAccumulator: theta_bar has the wrong dimension");
  const Vector tt = kron(theta_bar, theta_bar);
  const Vector v = aa_bar_ * tt - ab_bar_ * theta_bar + bb_bar_;
  const Matrix g = reshape(v, d_, d_);
  return (g + g.transpose()) / 2.0;
}

CovarianceEstimate MomentAccumulator::finalize(const Vector& theta_bar) const {
  CovarianceEstimate out;
  out.gamma_hat = gamma_hat(theta_bar);
  out.a_bar = a_bar_;
  out.n = n_;
  const Matrix a_inv = invert(a_bar_);
  out.lambda_hat = a_inv * out.gamma_hat * a_inv.transpose();
  out.lambda_hat = (out.lambda_hat + out.lambda_hat.transpose()) / 2.0;
  return out;
}

Matrix batch_gamma_oracle(std::span<const SampleTuple> samples, const Vector& theta_bar) {
  if (samples.empty()) throw DomainError("batch_gamma_oracle: no samples");
  const Eigen::Index d = theta_bar.size();
  Matrix sum = Matrix::Zero(d, d);
  for (const SampleTuple& s : samples) {
    const Vector u = s.A * theta_bar - s.b;
    sum += u * u.transpose();
  }
  return sum / static_cast<double>(samples.size());
}

nlohmann::json to_json(const CovarianceEstimate& e) {
  return {{"gamma_hat", rows_json(e.gamma_hat)},
          {"lambda_hat", rows_json(e.lambda_hat)},
          {"a_bar", rows_json(e.a_bar)},
          {"n", e.n}};
}

}  // namespace tdinf
