#pragma once

// Tabular Markov reward processes (the policy-induced kernel of an MDP) with
// linear features, exact ground truth by enumeration, and i.i.d. sampling of
// (s, s', r) tuples from the stationary distribution.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdinf/numkit.hpp"

namespace tdinf {

/// Policy-induced chain with rewards and a feature map. States are 0-based.
struct TabularMdp {
  Matrix kernel;    // n x n, row-stochastic
  Vector rewards;   // n, entries in [0, 1]
  double gamma = 0; // discount in [0, 1)
  Matrix features;  // n x d, row s is phi(s)

  Eigen::Index n_states() const { return kernel.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// Validates shapes, stochasticity, reward range and feature norms.
TabularMdp make_tabular_mdp(Matrix kernel, Vector rewards, double gamma, Matrix features);

/// q-vector of the hard family: (d-1)/2 copies of q+ followed by q-.
Vector hard_mdp_q(int d, double gamma, double eps);

/// The near-indistinguishable family with indicator features e_{min(s, d)}
/// and reward 1(s >= d) (1-based state labels).
TabularMdp build_hard_mdp(int n_states, int d, double gamma, double eps);

/// Closed-form stationary distribution of the hard family.
Vector hard_mdp_stationary(int n_states, int d);

/// Three-state, one-feature instance on which averaged TD can blow up.
TabularMdp build_divergence_mdp();

/// Left fixed point of P by power iteration from uniform.
Vector stationary_distribution(const Matrix& kernel);

struct GroundTruth {
  Vector mu;
  Matrix A;
  Vector b;
  Matrix Sigma;
  Vector theta_star;
  Matrix Gamma;
  Matrix Lambda_star;
  double lambda0 = 0;       // lambda_min(Sigma)
  double lambda_sigma = 0;  // lambda_max(Sigma)
};

/// Exact moments by enumeration over (s, s') weighted by mu(s) P(s'|s).
GroundTruth ground_truth(const TabularMdp& mdp);
GroundTruth ground_truth(const TabularMdp& mdp, const Vector& mu);

/// E[A_t^T A_t], enumerated.
Matrix expected_gram(const TabularMdp& mdp, const Vector& mu);

/// theta*(d) = 1 / (1 - g^2 - sum_i g^2 (1-q_i)^2 / ((d-1)(1 - g q_i)))
/// theta*(i) = g (1 - q_i) / (1 - g q_i) * theta*(d)
Vector closed_form_theta_star(double gamma, const Vector& q);
Vector closed_form_theta_star(int n_states, int d, double gamma, double eps, const Vector& q);

/// Margins of the matrix inequalities on A, Sigma that hold for every valid
/// instance. Each field is >= 0 (up to roundoff) when the inequality holds.
struct LemmaMargins {
  double lower_sym = 0;      // lambda_min((A + A^T) - 2(1-g) Sigma)
  double upper_sym = 0;      // -lambda_max((A + A^T) - 2(1+g) Sigma)
  double sym_part = 0;       // lambda_min((A + A^T)/2) - (1-g) lambda0
  double inverse_norm = 0;   // 1/(lambda0 (1-g)) - ||A^{-1}||
  double gram = 0;           // -lambda_max(E[A_t^T A_t] - (A + A^T))
  double contraction = 0;    // 1 - (1-g) lambda0 eta / 2 - ||I - eta A||, eta = 1/(4 lambda_sigma)
};

LemmaMargins lemma_margins(const TabularMdp& mdp, const GroundTruth& truth);

struct SampleTuple {
  Eigen::Index s = 0;
  Eigen::Index s_next = 0;
  double reward = 0;
  Matrix A;  // phi(s) (phi(s) - g phi(s'))^T
  Vector b;  // r(s) phi(s)
};

/// Builds the tuple for a given transition.
SampleTuple make_tuple(const TabularMdp& mdp, Eigen::Index s, Eigen::Index s_next);
void fill_tuple(const TabularMdp& mdp, Eigen::Index s, Eigen::Index s_next, SampleTuple& out);

/// Draws s ~ mu and s' ~ P(.|s) by inverse CDF on precomputed cumulative rows.
class TupleSampler {
 public:
  TupleSampler(const TabularMdp& mdp, const Vector& mu);

  struct Transition {
    Eigen::Index s;
    Eigen::Index s_next;
  };

  Transition draw_transition(Rng& rng) const;
  SampleTuple operator()(Rng& rng) const;
  /// Reuses the storage in `out`.
  void sample_into(Rng& rng, SampleTuple& out) const;

  const TabularMdp& mdp() const { return mdp_; }

 private:
  static Eigen::Index search(const std::vector<double>& cumulative, std::size_t offset,
                             std::size_t n, double u);

  TabularMdp mdp_;
  std::size_t n_;
  std::vector<double> mu_cdf_;
  std::vector<double> row_cdf_;  // n x n, row-major
};

/// sample_tuple as a free function; builds a sampler for a single draw.
SampleTuple sample_tuple(const TabularMdp& mdp, const Vector& mu, Rng& rng);

/// Fixed worst-case tuple on the divergence instance: s = 1, s' = 2 (1-based).
SampleTuple adversarial_stream(long t);

nlohmann::json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& j);
nlohmann::json ground_truth_to_json(const GroundTruth& truth);

}  // namespace tdinf
