#include "tdinf/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdinf/json_util.hpp"

namespace tdinf {

namespace {

constexpr double kRowSumTol = 1e-12;

std::string idx(Eigen::Index i) { return std::to_string(i); }

Matrix matrix_from_rows(const nlohmann::json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) throw DomainError("mdp json: '" + what + "' must be a non-empty array of rows");
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = static_cast<Eigen::Index>(rows.at(0).size());
  Matrix m(n_rows, n_cols);
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols)
      throw ShapeError("mdp json: '" + what + "' row " + idx(i) + " has the wrong length");
    for (Eigen::Index j = 0; j < n_cols; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

}  // namespace

TabularMdp make_tabular_mdp(Matrix kernel, Vector rewards, double gamma, Matrix features) {
  const Eigen::Index n = kernel.rows();
  if (n == 0) throw ConstructionError("mdp: at least one state is required");
  if (kernel.cols() != n) throw ShapeError("mdp: kernel must be square");
  if (rewards.size() != n) throw ShapeError("mdp: reward vector length must equal n_states");
  if (features.rows() != n) throw ShapeError("mdp: feature matrix must have one row per state");
  if (features.cols() == 0) throw ShapeError("mdp: feature dimension must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConstructionError("mdp: discount must lie in [0, 1)");
  require_finite(kernel, "mdp kernel");
  require_finite(rewards, "mdp rewards");
  require_finite(features, "mdp features");
  for (Eigen::Index s = 0; s < n; ++s) {
    if ((kernel.row(s).array() < 0.0).any())
      throw ConstructionError("mdp: kernel row " + idx(s) + " has a negative entry");
    const double sum = kernel.row(s).sum();
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw ConstructionError("mdp: kernel row " + idx(s) + " sums to " + std::to_string(sum));
    if (rewards(s) < 0.0 || rewards(s) > 1.0)
      throw ConstructionError("mdp: reward of state " + idx(s) + " outside [0, 1]");
    if (features.row(s).norm() > 1.0 + 1e-12)
      throw ConstructionError("mdp: feature of state " + idx(s) + " has norm above 1");
  }
  return TabularMdp{std::move(kernel), std::move(rewards), gamma, std::move(features)};
}

Vector hard_mdp_q(int d, double gamma, double eps) {
  if (d < 3 || d % 2 == 0) throw ConstructionError("hard mdp: d must be odd and at least 3");
  const double shift = (1.0 - gamma) * (1.0 - gamma) * eps;
  const double q_plus = gamma + shift;
  const double q_minus = gamma - shift;
  if (!(q_plus > 0.0 && q_plus < 1.0 && q_minus > 0.0 && q_minus < 1.0))
    throw ConstructionError("hard mdp: q+ and q- must lie in (0, 1)");
  Vector q(d - 1);
  const int half = (d - 1) / 2;
  for (int i = 0; i < d - 1; ++i) q(i) = i < half ? q_plus : q_minus;
  return q;
}

TabularMdp build_hard_mdp(int n_states, int d, double gamma, double eps) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConstructionError("hard mdp: gamma must lie in (0, 1)");
  const Vector q = hard_mdp_q(d, gamma, eps);
  if (d > n_states) throw ConstructionError("hard mdp: d must not exceed the number of states");

  // 1-based labels: states 1..d-1 are "low", d..|S| share the feature e_d.
  const double tail = static_cast<double>(n_states - d + 1);
  Matrix kernel = Matrix::Zero(n_states, n_states);
  for (int s = 1; s <= n_states; ++s) {
    for (int sn = 1; sn <= n_states; ++sn) {
      double p = 0.0;
      if (s < d) {
        if (sn == s) p += q(s - 1);
        if (sn >= d) p += (1.0 - q(s - 1)) / tail;
      } else {
        if (sn >= d) p += gamma / tail;
        if (sn < d) p += (1.0 - q(sn - 1)) / (d - 1);
      }
      kernel(s - 1, sn - 1) = p;
    }
    if (s >= d) kernel.row(s - 1) /= kernel.row(s - 1).sum();
  }

  Matrix features = Matrix::Zero(n_states, d);
  Vector rewards(n_states);
  for (int s = 1; s <= n_states; ++s) {
    features(s - 1, std::min(s, d) - 1) = 1.0;
    rewards(s - 1) = s >= d ? 1.0 : 0.0;
  }
  return make_tabular_mdp(std::move(kernel), std::move(rewards), gamma, std::move(features));
}

Vector hard_mdp_stationary(int n_states, int d) {
  Vector mu(n_states);
  for (int s = 1; s <= n_states; ++s)
    mu(s - 1) = s < d ? 1.0 / (2.0 * (d - 1)) : 1.0 / (2.0 * (n_states - d + 1));
  return mu;
}

TabularMdp build_divergence_mdp() {
  Matrix kernel(3, 3);
  kernel << 0.1, 0.1, 0.8,
            0.1, 0.1, 0.8,
            0.1, 0.1, 0.8;
  Vector rewards(3);
  rewards << 0.1, 0.1, 1.0;
  Matrix features(3, 1);
  features << -0.5, -1.0, 1.0;
  return make_tabular_mdp(std::move(kernel), std::move(rewards), 0.9, std::move(features));
}

Vector stationary_distribution(const Matrix& kernel) {
  require_square(kernel, "stationary_distribution");
  const Eigen::Index n = kernel.rows();
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (long it = 0; it < 1'000'000; ++it) {
    Eigen::RowVectorXd next = mu * kernel;
    next /= next.sum();
    const double change = (next - mu).lpNorm<1>();
    mu = std::move(next);
    if (change <= 1e-12) return mu.transpose();
  }
  throw ConvergenceError("stationary_distribution: power iteration did not converge");
}

GroundTruth ground_truth(const TabularMdp& mdp) {
  return ground_truth(mdp, stationary_distribution(mdp.kernel));
}

GroundTruth ground_truth(const TabularMdp& mdp, const Vector& mu) {
  const Eigen::Index n = mdp.n_states();
  const Eigen::Index d = mdp.dim();
  if (mu.size() != n) throw ShapeError("ground_truth: mu has the wrong length");

  GroundTruth g;
  g.mu = mu;
  g.A = Matrix::Zero(d, d);
  g.b = Vector::Zero(d);
  g.Sigma = Matrix::Zero(d, d);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Vector phi = mdp.features.row(s).transpose();
    g.Sigma += mu(s) * phi * phi.transpose();
    g.b += mu(s) * mdp.rewards(s) * phi;
    for (Eigen::Index sn = 0; sn < n; ++sn) {
      const double w = mu(s) * mdp.kernel(s, sn);
      if (w == 0.0) continue;
      const Vector next = mdp.features.row(sn).transpose();
      g.A += w * phi * (phi - mdp.gamma * next).transpose();
    }
  }

  const Matrix a_inv = invert(g.A);
  g.theta_star = a_inv * g.b;

  g.Gamma = Matrix::Zero(d, d);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Vector phi = mdp.features.row(s).transpose();
    for (Eigen::Index sn = 0; sn < n; ++sn) {
      const double w = mu(s) * mdp.kernel(s, sn);
      if (w == 0.0) continue;
      const Vector next = mdp.features.row(sn).transpose();
      const double td_error = (phi - mdp.gamma * next).dot(g.theta_star) - mdp.rewards(s);
      g.Gamma += w * td_error * td_error * phi * phi.transpose();
    }
  }
  g.Gamma = (g.Gamma + g.Gamma.transpose()) / 2.0;
  g.Lambda_star = a_inv * g.Gamma * a_inv.transpose();
  g.Lambda_star = (g.Lambda_star + g.Lambda_star.transpose()) / 2.0;

  const SymEig<double> eig = sym_eig(g.Sigma);
  g.lambda0 = eig.values.minCoeff();
  g.lambda_sigma = eig.values.maxCoeff();
  return g;
}

Matrix expected_gram(const TabularMdp& mdp, const Vector& mu) {
  const Eigen::Index n = mdp.n_states();
  const Eigen::Index d = mdp.dim();
  Matrix out = Matrix::Zero(d, d);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Vector phi = mdp.features.row(s).transpose();
    for (Eigen::Index sn = 0; sn < n; ++sn) {
      const double w = mu(s) * mdp.kernel(s, sn);
      if (w == 0.0) continue;
      const Matrix a = phi * (phi - mdp.gamma * mdp.features.row(sn).transpose()).transpose();
      out += w * a.transpose() * a;
    }
  }
  return out;
}

Vector closed_form_theta_star(double gamma, const Vector& q) {
  const Eigen::Index m = q.size();  // d - 1
  if (m < 1) throw DomainError("closed_form_theta_star: q must be non-empty");
  double denom = 1.0 - gamma * gamma;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double qi = q(i);
    denom -= gamma * gamma * (1.0 - qi) * (1.0 - qi) / (static_cast<double>(m) * (1.0 - gamma * qi));
  }
  if (!(denom > 0.0)) throw DomainError("closed_form_theta_star: non-positive denominator");
  Vector theta(m + 1);
  theta(m) = 1.0 / denom;
  for (Eigen::Index i = 0; i < m; ++i) theta(i) = gamma * (1.0 - q(i)) / (1.0 - gamma * q(i)) * theta(m);
  return theta;
}

Vector closed_form_theta_star(int /*n_states*/, int d, double gamma, double /*eps*/, const Vector& q) {
  if (q.size() != d - 1) throw ShapeError("closed_form_theta_star: q must have d - 1 entries");
  return closed_form_theta_star(gamma, q);
}

LemmaMargins lemma_margins(const TabularMdp& mdp, const GroundTruth& t) {
  const double g = mdp.gamma;
  const Eigen::Index d = t.A.rows();
  const Matrix sym = t.A + t.A.transpose();
  LemmaMargins m;
  m.lower_sym = lambda_min(Matrix(sym - 2.0 * (1.0 - g) * t.Sigma));
  m.upper_sym = -lambda_max(Matrix(sym - 2.0 * (1.0 + g) * t.Sigma));
  m.sym_part = lambda_min(Matrix(sym / 2.0)) - (1.0 - g) * t.lambda0;
  m.inverse_norm = 1.0 / (t.lambda0 * (1.0 - g)) - operator_norm(invert(t.A));
  m.gram = -lambda_max(Matrix(expected_gram(mdp, t.mu) - sym));
  const double eta = 1.0 / (4.0 * t.lambda_sigma);
  m.contraction = 1.0 - (1.0 - g) * t.lambda0 * eta / 2.0 -
                  operator_norm(Matrix(Matrix::Identity(d, d) - eta * t.A));
  return m;
}

void fill_tuple(const TabularMdp& mdp, Eigen::Index s, Eigen::Index s_next, SampleTuple& out) {
  out.s = s;
  out.s_next = s_next;
  out.reward = mdp.rewards(s);
  const auto phi = mdp.features.row(s);
  out.A.noalias() = phi.transpose() * (phi - mdp.gamma * mdp.features.row(s_next));
  out.b.noalias() = out.reward * phi.transpose();
}

SampleTuple make_tuple(const TabularMdp& mdp, Eigen::Index s, Eigen::Index s_next) {
  SampleTuple out;
  fill_tuple(mdp, s, s_next, out);
  return out;
}

TupleSampler::TupleSampler(const TabularMdp& mdp, const Vector& mu)
    : mdp_(mdp), n_(static_cast<std::size_t>(mdp.n_states())) {
  if (mu.size() != mdp.n_states()) throw ShapeError("TupleSampler: mu has the wrong length");
  mu_cdf_.resize(n_);
  double acc = 0.0;
  for (std::size_t s = 0; s < n_; ++s) {
    acc += mu(static_cast<Eigen::Index>(s));
    mu_cdf_[s] = acc;
  }
  row_cdf_.resize(n_ * n_);
  for (std::size_t s = 0; s < n_; ++s) {
    acc = 0.0;
    for (std::size_t sn = 0; sn < n_; ++sn) {
      acc += mdp.kernel(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(sn));
      row_cdf_[s * n_ + sn] = acc;
    }
  }
}

Eigen::Index TupleSampler::search(const std::vector<double>& cumulative, std::size_t offset,
                                  std::size_t n, double u) {
  const auto first = cumulative.begin() + static_cast<std::ptrdiff_t>(offset);
  const auto last = first + static_cast<std::ptrdiff_t>(n);
  auto it = std::upper_bound(first, last, u * *(last - 1));
  if (it == last) {
    // u * total landed on the total; take the last state with positive mass.
    it = last - 1;
    while (it != first && *(it - 1) == *it) --it;
  }
  return static_cast<Eigen::Index>(it - first);
}

TupleSampler::Transition TupleSampler::draw_transition(Rng& rng) const {
  const Eigen::Index s = search(mu_cdf_, 0, n_, uniform01(rng));
  const Eigen::Index sn = search(row_cdf_, static_cast<std::size_t>(s) * n_, n_, uniform01(rng));
  return {s, sn};
}

void TupleSampler::sample_into(Rng& rng, SampleTuple& out) const {
  const Transition tr = draw_transition(rng);
  fill_tuple(mdp_, tr.s, tr.s_next, out);
}

SampleTuple TupleSampler::operator()(Rng& rng) const {
  SampleTuple out;
  sample_into(rng, out);
  return out;
}

SampleTuple sample_tuple(const TabularMdp& mdp, const Vector& mu, Rng& rng) {
  return TupleSampler(mdp, mu)(rng);
}

SampleTuple adversarial_stream(long /*t*/) {
  static const TabularMdp mdp = build_divergence_mdp();
  return make_tuple(mdp, 0, 1);
}

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
  return {{"n_states", mdp.n_states()},
          {"gamma", mdp.gamma},
          {"kernel", rows_json(mdp.kernel)},
          {"rewards", entries_json(mdp.rewards)},
          {"features", rows_json(mdp.features)}};
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
  try {
    const auto n = j.at("n_states").get<Eigen::Index>();
    Matrix kernel = matrix_from_rows(j.at("kernel"), "kernel");
    Matrix features = matrix_from_rows(j.at("features"), "features");
    const auto& r = j.at("rewards");
    Vector rewards(static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) rewards(static_cast<Eigen::Index>(i)) = r.at(i).get<double>();
    if (kernel.rows() != n) throw ShapeError("mdp json: n_states does not match the kernel");
    return make_tabular_mdp(std::move(kernel), std::move(rewards), j.at("gamma").get<double>(),
                            std::move(features));
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("mdp json: ") + e.what());
  }
}

nlohmann::json ground_truth_to_json(const GroundTruth& t) {
  return {{"mu", entries_json(t.mu)},
          {"A", rows_json(t.A)},
          {"b", entries_json(t.b)},
          {"Sigma", rows_json(t.Sigma)},
          {"theta_star", entries_json(t.theta_star)},
          {"Gamma", rows_json(t.Gamma)},
          {"Lambda_star", rows_json(t.Lambda_star)},
          {"lambda0", t.lambda0},
          {"lambda_sigma", t.lambda_sigma}};
}

}  // namespace tdinf
