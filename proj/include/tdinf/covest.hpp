#pragma once

// Streaming plug-in estimator of the asymptotic covariance of averaged TD.
//
// With row-major vec, vec(u u^T) = u (x) u, so for u_t = A_t theta - b_t
//
//   vec(Gamma_hat) = mean(A_t (x) A_t) (theta (x) theta)
//                  - mean(A_t (x) b_t + b_t (x) A_t) theta
//                  + mean(b_t (x) b_t).
//
// The three means do not depend on theta, so they can be accumulated online
// and combined with the final theta_bar in O(d^4) memory.

#include <span>

#include <json.hpp>

#include "tdinf/mdp.hpp"
#include "tdinf/numkit.hpp"

namespace tdinf {

struct CovarianceEstimate {
  Matrix gamma_hat;
  Matrix lambda_hat;
  Matrix a_bar;
  long n = 0;
};

class MomentAccumulator {
 public:
  explicit MomentAccumulator(Eigen::Index d);

  void update(const Matrix& a, const Vector& b);
  void update(const SampleTuple& sample) { update(sample.A, sample.b); }

  /// Rank-one update for A_t = phi (phi - g phi')^T, b_t = r phi. Produces
  /// the same moments as update(A_t, b_t).
  void update_features(const Eigen::Ref<const Vector>& phi, const Eigen::Ref<const Vector>& phi_next,
                       double gamma, double reward);

  /// Gamma_hat and Lambda_hat = A_bar^{-1} Gamma_hat A_bar^{-T}. Throws
  /// DomainError with no samples, SingularError if A_bar is singular.
  CovarianceEstimate finalize(const Vector& theta_bar) const;

  /// Gamma_hat only; does not need A_bar to be invertible.
  Matrix gamma_hat(const Vector& theta_bar) const;

  long count() const { return n_; }
  Eigen::Index dim() const { return d_; }
  const Matrix& a_bar() const { return a_bar_; }
  const Matrix& aa_bar() const { return aa_bar_; }  // d^2 x d^2
  const Matrix& ab_bar() const { return ab_bar_; }  // d^2 x d
  const Vector& bb_bar() const { return bb_bar_; }  // d^2

 private:
  void update_from(const Matrix& a, const Vector& b);

  Eigen::Index d_;
  long n_ = 0;
  Matrix a_bar_;
  Matrix aa_bar_;
  Matrix ab_bar_;
  Vector bb_bar_;
  Matrix scratch_a_;
  Vector scratch_b_;
};

/// Direct definition: (1/T) sum_t (A_t theta - b_t)(A_t theta - b_t)^T.
Matrix batch_gamma_oracle(std::span<const SampleTuple> samples, const Vector& theta_bar);

nlohmann::json to_json(const CovarianceEstimate& estimate);

}  // namespace tdinf
