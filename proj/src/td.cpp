#include "tdinf/td.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tdinf {

void StepSchedule::validate() const {
  if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw DomainError("schedule: eta0 must be positive");
  if (!(alpha >= 0.5 && alpha < 1.0)) throw DomainError("schedule: alpha must lie in [1/2, 1)");
}

double stepsize(const StepSchedule& schedule, long t) {
  if (t < 1) throw DomainError("stepsize: iterations are 1-based, got t = " + std::to_string(t));
  return schedule.eta0 * std::pow(static_cast<double>(t), -schedule.alpha);
}

TdState td_init(const Vector& theta0) {
  require_finite(theta0, "td_init");
  return TdState{0, theta0, theta0};
}

namespace {

void finish_step(TdState& state) {
  if (!state.theta.allFinite()) {
    throw NumericError("td_step: non-finite iterate at t = " + std::to_string(state.t));
  }
  state.theta_bar += (state.theta - state.theta_bar) / static_cast<double>(state.t);
}

}  // namespace

void td_step(TdState& state, const Matrix& a, const Vector& b, const StepSchedule& schedule) {
  const Eigen::Index d = state.theta.size();
  if (a.rows() != d || a.cols() != d || b.size() != d) throw ShapeError("td_step: dimension mismatch");
  state.t += 1;
  const double eta = stepsize(schedule, state.t);
  const Vector residual = a * state.theta - b;
  state.theta -= eta * residual;
  finish_step(state);
}

void td_step(TdState& state, const SampleTuple& sample, const StepSchedule& schedule) {
  td_step(state, sample.A, sample.b, schedule);
}

void td_step_features(TdState& state, const Eigen::Ref<const Vector>& phi,
                      const Eigen::Ref<const Vector>& phi_next, double gamma, double reward,
                      const StepSchedule& schedule) {
  state.t += 1;
  const double eta = stepsize(schedule, state.t);
  // A_t theta - b_t = phi * ((phi - g phi')^T theta - r)
  const double td_error = phi.dot(state.theta) - gamma * phi_next.dot(state.theta) - reward;
  state.theta -= (eta * td_error) * phi;
  finish_step(state);
}

std::vector<long> arithmetic_checkpoints(long every, long horizon) {
  if (every < 1) throw DomainError("checkpoint interval must be positive");
  if (horizon < 1) throw DomainError("horizon must be positive");
  std::vector<long> out;
  for (long t = every; t <= horizon; t += every) out.push_back(t);
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

std::vector<long> geometric_checkpoints(int per_decade, long horizon) {
  if (per_decade < 1) throw DomainError("checkpoints per decade must be positive");
  if (horizon < 1) throw DomainError("horizon must be positive");
  std::vector<long> out;
  for (int j = 0;; ++j) {
    const long t = std::llround(std::pow(10.0, static_cast<double>(j) / per_decade));
    if (t > horizon) break;
    if (out.empty() || t > out.back()) out.push_back(t);
  }
  if (out.back() != horizon) out.push_back(horizon);
  return out;
}

void validate_checkpoints(const std::vector<long>& checkpoints, long horizon) {
  long prev = 0;
  for (long t : checkpoints) {
    if (t <= prev || t > horizon)
      throw DomainError("checkpoints must be strictly increasing within [1, horizon]");
    prev = t;
  }
}

std::vector<Checkpoint> run_td(const TabularMdp& mdp, const Vector& mu, const StepSchedule& schedule,
                               long horizon, std::uint64_t seed, const std::vector<long>& checkpoints,
                               const TdRunOptions& options) {
  schedule.validate();
  if (horizon < 1) throw DomainError("run_td: horizon must be positive");
  validate_checkpoints(checkpoints, horizon);

  const TupleSampler sampler(mdp, mu);
  Rng rng(seed);
  TdState state = options.theta0 ? td_init(*options.theta0) : td_init(mdp.dim());
  if (state.theta.size() != mdp.dim()) throw ShapeError("run_td: theta0 has the wrong dimension");

  // Columns are contiguous, so feature lookups below do not copy.
  const Matrix phi = mdp.features.transpose();
  std::vector<Checkpoint> out;
  out.reserve(checkpoints.size());
  auto next = checkpoints.begin();
  for (long t = 1; t <= horizon && next != checkpoints.end(); ++t) {
    const auto tr = sampler.draw_transition(rng);
    td_step_features(state, phi.col(tr.s), phi.col(tr.s_next), mdp.gamma, mdp.rewards(tr.s), schedule);
    if (t == *next) {
      out.push_back({t, state.theta_bar, state.theta});
      ++next;
    }
  }
  return out;
}

Matrix compute_Q(long t, long horizon, const StepSchedule& schedule, const Matrix& a) {
  require_square(a, "compute_Q");
  if (t < 1 || t > horizon) throw DomainError("compute_Q: need 1 <= t <= T");
  const Eigen::Index d = a.rows();
  const Matrix eye = Matrix::Identity(d, d);
  // Backward accumulation of S = sum_{j=t}^{T} prod_{k=t+1}^{j} (I - eta_k A):
  // S_T = I, S_j = I + (I - eta_{j+1} A) S_{j+1}.
  Matrix sum = eye;
  for (long j = horizon - 1; j >= t; --j) sum = eye + (eye - stepsize(schedule, j + 1) * a) * sum;
  return stepsize(schedule, t) * sum;
}

std::vector<Matrix> compute_Q_all(long horizon, const StepSchedule& schedule, const Matrix& a) {
  require_square(a, "compute_Q_all");
  if (horizon < 1) throw DomainError("compute_Q_all: horizon must be positive");
  const Eigen::Index d = a.rows();
  const Matrix eye = Matrix::Identity(d, d);
  std::vector<Matrix> q(static_cast<std::size_t>(horizon));
  q.back() = stepsize(schedule, horizon) * eye;
  for (long t = horizon - 1; t >= 1; --t) {
    const double eta_t = stepsize(schedule, t);
    const double eta_next = stepsize(schedule, t + 1);
    q[static_cast<std::size_t>(t - 1)] =
        eta_t * eye + (eta_t / eta_next) * (eye - eta_next * a) * q[static_cast<std::size_t>(t)];
  }
  return q;
}

Matrix lambda_bar(long horizon, const StepSchedule& schedule, const Matrix& a, const Matrix& gamma_noise) {
  if (gamma_noise.rows() != a.rows() || gamma_noise.cols() != a.cols())
    throw ShapeError("lambda_bar: Gamma must match A");
  const Eigen::Index d = a.rows();
  const Matrix eye = Matrix::Identity(d, d);
  // Same recursion as compute_Q_all without storing every Q_t.
  Matrix q = stepsize(schedule, horizon) * eye;
  Matrix acc = q * gamma_noise * q.transpose();
  for (long t = horizon - 1; t >= 1; --t) {
    const double eta_t = stepsize(schedule, t);
    const double eta_next = stepsize(schedule, t + 1);
    q = eta_t * eye + (eta_t / eta_next) * (eye - eta_next * a) * q;
    acc.noalias() += q * gamma_noise * q.transpose();
  }
  acc /= static_cast<double>(horizon);
  return (acc + acc.transpose()) / 2.0;
}

}  // namespace tdinf
