#pragma once

// TD(0) with linear features, eta_t = eta0 * t^-alpha, and Polyak-Ruppert
// averaging of the iterates. Iterations are 1-based.

#include <cstdint>
#include <optional>
#include <vector>

#include "tdinf/mdp.hpp"
#include "tdinf/numkit.hpp"

namespace tdinf {

struct StepSchedule {
  double eta0 = 5.0;
  double alpha = 2.0 / 3.0;

  /// Throws DomainError unless eta0 > 0 and alpha in [1/2, 1).
  void validate() const;
};

/// eta0 * t^-alpha for t >= 1.
double stepsize(const StepSchedule& schedule, long t);

struct TdState {
  long t = 0;
  Vector theta;
  Vector theta_bar;
};

TdState td_init(const Vector& theta0);
inline TdState td_init(Eigen::Index d) { return td_init(Vector::Zero(d)); }

/// theta <- theta - eta_t (A_t theta - b_t); theta_bar tracks the running
/// mean of theta_1..theta_t. Throws NumericError on a non-finite iterate.
void td_step(TdState& state, const Matrix& a, const Vector& b, const StepSchedule& schedule);
void td_step(TdState& state, const SampleTuple& sample, const StepSchedule& schedule);

/// Rank-one form A_t = phi (phi - g phi')^T, avoiding the d x d product.
void td_step_features(TdState& state, const Eigen::Ref<const Vector>& phi,
                      const Eigen::Ref<const Vector>& phi_next, double gamma, double reward,
                      const StepSchedule& schedule);

struct Checkpoint {
  long t = 0;
  Vector theta_bar;
  Vector theta;
};

/// k, 2k, ... up to horizon; horizon itself is always included.
std::vector<long> arithmetic_checkpoints(long every, long horizon);
/// round(10^(j / per_decade)) for j = 0, 1, ... up to horizon, deduplicated,
/// with horizon itself included.
std::vector<long> geometric_checkpoints(int per_decade, long horizon);

struct TdRunOptions {
  std::optional<Vector> theta0;  // defaults to zero
};

/// Runs `horizon` i.i.d.-sampled steps from seed and records theta_bar (and
/// theta) at each requested checkpoint. `checkpoints` must be strictly
/// increasing within [1, horizon].
std::vector<Checkpoint> run_td(const TabularMdp& mdp, const Vector& mu, const StepSchedule& schedule,
                               long horizon, std::uint64_t seed, const std::vector<long>& checkpoints,
                               const TdRunOptions& options = {});

void validate_checkpoints(const std::vector<long>& checkpoints, long horizon);

/// Q_t = eta_t sum_{j=t}^{T} prod_{k=t+1}^{j} (I - eta_k A).
Matrix compute_Q(long t, long horizon, const StepSchedule& schedule, const Matrix& a);

/// All Q_1..Q_T via the backward recursion
/// Q_t = eta_t I + (eta_t / eta_{t+1}) (I - eta_{t+1} A) Q_{t+1}.
std::vector<Matrix> compute_Q_all(long horizon, const StepSchedule& schedule, const Matrix& a);

/// (1/T) sum_t Q_t Gamma Q_t^T.
Matrix lambda_bar(long horizon, const StepSchedule& schedule, const Matrix& a, const Matrix& gamma_noise);

}  // namespace tdinf
