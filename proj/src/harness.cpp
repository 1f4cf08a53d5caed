#include "tdinf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "tdinf/covest.hpp"
#include "tdinf/inference.hpp"
#include "tdinf/json_util.hpp"
#include "tdinf/metrics.hpp"

#ifndef TDINF_VERSION
#define TDINF_VERSION "dev"
#endif

namespace tdinf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct KindName {
  ExperimentKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {ExperimentKind::L2Quantile, "l2-quantile"}, {ExperimentKind::BerryEsseen, "berry-esseen"},
    {ExperimentKind::CovError, "cov-error"},     {ExperimentKind::Coverage, "coverage"},
    {ExperimentKind::Divergence, "divergence"},  {ExperimentKind::GroundTruth, "ground-truth"},
    {ExperimentKind::RunTd, "run-td"},
};

std::string index_name(const std::string& base, Eigen::Index i) { return base + "[" + std::to_string(i + 1) + "]"; }

std::string index_name(const std::string& base, Eigen::Index i, Eigen::Index j) {
  return base + "[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]";
}

// Runs f(i) for i in [0, n) on a pool of worker threads. The first exception
// thrown by any worker is rethrown after all workers have stopped.
template <typename F>
void for_each_trial(long n, int threads, F&& f) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max(1L, n))));
  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (long i = next++; i < n && !failed; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

// What each stochastic experiment needs from a trial.
struct TrialNeeds {
  bool moments = false;
  bool coverage = false;
  bool cov_error = false;
};

struct TrialOutput {
  std::vector<double> theta_bar;   // checkpoints x d, NaN after divergence
  std::vector<double> cov_error;   // checkpoints, NaN when unavailable
  std::vector<signed char> covered;  // checkpoints x (d + 2), -1 when unavailable
};

struct TrialContext {
  const ExperimentConfig& config;
  const TabularMdp& mdp;
  const GroundTruth& truth;
  const TupleSampler& sampler;
  const Matrix& phi;  // d x n, column s is phi(s)
  const std::vector<long>& grid;
  TrialNeeds needs;
  long burn_in;
};

TrialOutput run_trial(const TrialContext& ctx, long trial) {
  const Eigen::Index d = ctx.mdp.dim();
  const std::size_t n_cp = ctx.grid.size();
  const std::size_t cover_width = static_cast<std::size_t>(d) + 2;
  const ExperimentConfig& cfg = ctx.config;

  TrialOutput out;
  out.theta_bar.assign(n_cp * static_cast<std::size_t>(d), kNaN);
  if (ctx.needs.cov_error) out.cov_error.assign(n_cp, kNaN);
  if (ctx.needs.coverage) out.covered.assign(n_cp * cover_width, -1);

  Rng rng(cfg.base_seed + static_cast<std::uint64_t>(trial));
  std::optional<LinfQuantileSampler> quantiles;
  if (ctx.needs.coverage) {
    Rng qrng(cfg.base_seed + static_cast<std::uint64_t>(cfg.trials) + static_cast<std::uint64_t>(trial));
    quantiles.emplace(d, cfg.n_sims, qrng);
  }
  std::optional<MomentAccumulator> acc;
  if (ctx.needs.moments) acc.emplace(d);

  TdState state = td_init(d);
  std::size_t next = 0;
  try {
    for (long t = 1; t <= cfg.horizon && next < n_cp; ++t) {
      const auto tr = ctx.sampler.draw_transition(rng);
      const auto phi = ctx.phi.col(tr.s);
      const auto phi_next = ctx.phi.col(tr.s_next);
      const double reward = ctx.mdp.rewards(tr.s);
      td_step_features(state, phi, phi_next, ctx.mdp.gamma, reward, cfg.schedule);
      if (acc) acc->update_features(phi, phi_next, ctx.mdp.gamma, reward);
      if (t != ctx.grid[next]) continue;

      for (Eigen::Index j = 0; j < d; ++j) out.theta_bar[next * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] = state.theta_bar(j);
      if (acc && t >= ctx.burn_in) {
        try {
          const CovarianceEstimate est = acc->finalize(state.theta_bar);
          if (ctx.needs.cov_error) out.cov_error[next] = frobenius_error(est.lambda_hat, ctx.truth.Lambda_star);
          if (ctx.needs.coverage) {
            signed char* row = out.covered.data() + next * cover_width;
            const HyperrectRegion ind = individual_ci(state.theta_bar, est.lambda_hat, t, cfg.delta);
            for (Eigen::Index j = 0; j < d; ++j) row[j] = contains_coordinate(ind, ctx.truth.theta_star, j) ? 1 : 0;
            const HyperrectRegion sim = simultaneous_ci(state.theta_bar, est.lambda_hat, t, cfg.delta, *quantiles);
            row[d] = contains(sim, ctx.truth.theta_star) ? 1 : 0;
            try {
              const EllipsoidRegion ell = ellipsoid_region(state.theta_bar, est.lambda_hat, t, cfg.delta);
              row[d + 1] = contains(ell, ctx.truth.theta_star) ? 1 : 0;
            } catch (const SingularError&) {
            }
          }
        } catch (const SingularError&) {
        } catch (const NotPsdError&) {
        }
      }
      ++next;
    }
  } catch (const NumericError&) {
    // Diverged: remaining checkpoints stay NaN / unavailable.
  }
  return out;
}

void add_row(ResultTable& table, const ExperimentConfig& cfg, long t, std::string stat, double value, long trials) {
  table.rows.push_back(ResultRow{to_string(cfg.kind), t, std::move(stat), value, trials, cfg.base_seed});
}

nlohmann::json make_header(const ExperimentConfig& cfg) {
  return {{"tool", "tdinf"},
          {"version", TDINF_VERSION},
          {"config", cfg.to_json()},
          {"seeds",
           {{"base_seed", cfg.base_seed},
            {"trial_seed", "base_seed + i"},
            {"quantile_seed", "base_seed + trials + i"}}}};
}

ResultTable run_ground_truth(const ExperimentConfig& cfg) {
  const TabularMdp mdp = build_mdp(cfg.mdp);
  const GroundTruth g = ground_truth(mdp);
  ResultTable table;
  table.header = make_header(cfg);
  table.header["ground_truth"] = ground_truth_to_json(g);
  const Eigen::Index d = mdp.dim();
  for (Eigen::Index s = 0; s < g.mu.size(); ++s) add_row(table, cfg, 0, index_name("mu", s), g.mu(s), 0);
  for (Eigen::Index i = 0; i < d; ++i) add_row(table, cfg, 0, index_name("b", i), g.b(i), 0);
  for (Eigen::Index i = 0; i < d; ++i) add_row(table, cfg, 0, index_name("theta_star", i), g.theta_star(i), 0);
  const std::pair<const char*, const Matrix*> mats[] = {
      {"A", &g.A}, {"Sigma", &g.Sigma}, {"Gamma", &g.Gamma}, {"Lambda_star", &g.Lambda_star}};
  for (const auto& [name, m] : mats)
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) add_row(table, cfg, 0, index_name(name, i, j), (*m)(i, j), 0);
  add_row(table, cfg, 0, "lambda0", g.lambda0, 0);
  add_row(table, cfg, 0, "lambda_sigma", g.lambda_sigma, 0);
  return table;
}

ResultTable run_divergence(const ExperimentConfig& cfg) {
  const TabularMdp mdp = build_divergence_mdp();
  const GroundTruth g = ground_truth(mdp);
  const double theta_star = g.theta_star(0);
  const std::vector<long> grid = cfg.checkpoint_grid();

  ResultTable table;
  table.header = make_header(cfg);
  table.header["theta_star"] = theta_star;

  TdState state = td_init(1);
  std::size_t next = 0;
  bool finite = true;
  const SampleTuple sample = adversarial_stream(0);
  for (long t = 1; t <= cfg.horizon && next < grid.size(); ++t) {
    if (finite) {
      try {
        td_step(state, sample, cfg.schedule);
      } catch (const NumericError&) {
        finite = false;
      }
    }
    if (t != grid[next]) continue;
    const double delta_bar = finite ? state.theta_bar(0) - theta_star : kNaN;
    const double closed = adversarial_delta_bar(cfg.schedule, t, theta_star);
    add_row(table, cfg, t, "delta_bar", delta_bar, 1);
    add_row(table, cfg, t, "delta_bar_closed_form", closed, 1);
    add_row(table, cfg, t, "delta_bar_norm", std::abs(delta_bar), 1);
    add_row(table, cfg, t, "relative_error", std::abs(delta_bar - closed) / std::abs(closed), 1);
    ++next;
  }
  return table;
}

ResultTable run_single_td(const ExperimentConfig& cfg) {
  const TabularMdp mdp = build_mdp(cfg.mdp);
  const Vector mu = stationary_distribution(mdp.kernel);
  const std::vector<long> grid = cfg.checkpoint_grid();
  ResultTable table;
  table.header = make_header(cfg);
  const auto cps = run_td(mdp, mu, cfg.schedule, cfg.horizon, cfg.base_seed, grid);
  for (const Checkpoint& cp : cps) {
    for (Eigen::Index j = 0; j < cp.theta_bar.size(); ++j)
      add_row(table, cfg, cp.t, index_name("theta_bar", j), cp.theta_bar(j), 1);
    for (Eigen::Index j = 0; j < cp.theta.size(); ++j)
      add_row(table, cfg, cp.t, index_name("theta", j), cp.theta(j), 1);
  }
  return table;
}

ResultTable run_monte_carlo(const ExperimentConfig& cfg) {
  const TabularMdp mdp = build_mdp(cfg.mdp);
  const GroundTruth truth = ground_truth(mdp);
  const TupleSampler sampler(mdp, truth.mu);
  const Matrix phi = mdp.features.transpose();
  const std::vector<long> grid = cfg.checkpoint_grid();
  const Eigen::Index d = mdp.dim();

  TrialNeeds needs;
  needs.coverage = cfg.kind == ExperimentKind::Coverage;
  needs.cov_error = cfg.kind == ExperimentKind::CovError;
  needs.moments = needs.coverage || needs.cov_error;
  const TrialContext ctx{cfg, mdp, truth, sampler, phi, grid, needs, 10 * static_cast<long>(d)};

  std::vector<TrialOutput> outputs(static_cast<std::size_t>(cfg.trials));
  for_each_trial(cfg.trials, cfg.threads,
                 [&](long i) { outputs[static_cast<std::size_t>(i)] = run_trial(ctx, i); });

  ResultTable table;
  table.header = make_header(cfg);
  table.header["ground_truth"] = ground_truth_to_json(truth);

  const auto M = static_cast<std::size_t>(cfg.trials);
  const auto du = static_cast<std::size_t>(d);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const long t = grid[c];
    const double root_t = std::sqrt(static_cast<double>(t));
    std::vector<double> norms;
    norms.reserve(M);
    std::vector<std::size_t> finite_trials;
    for (std::size_t i = 0; i < M; ++i) {
      const double* th = outputs[i].theta_bar.data() + c * du;
      double sq = 0.0;
      for (std::size_t j = 0; j < du; ++j) sq += (th[j] - truth.theta_star(static_cast<Eigen::Index>(j))) * (th[j] - truth.theta_star(static_cast<Eigen::Index>(j)));
      if (std::isfinite(sq)) {
        finite_trials.push_back(i);
        norms.push_back(std::sqrt(sq));
      } else {
        norms.push_back(std::numeric_limits<double>::infinity());
      }
    }
    const long diverged = static_cast<long>(M - finite_trials.size());

    switch (cfg.kind) {
      case ExperimentKind::L2Quantile:
        add_row(table, cfg, t, "l2_quantile", empirical_quantile(norms, 1.0 - cfg.delta), cfg.trials);
        break;
      case ExperimentKind::BerryEsseen: {
        double ks = kNaN;
        if (finite_trials.size() >= 10) {
          Matrix scaled(static_cast<Eigen::Index>(finite_trials.size()), d);
          for (std::size_t r = 0; r < finite_trials.size(); ++r) {
            const double* th = outputs[finite_trials[r]].theta_bar.data() + c * du;
            for (Eigen::Index j = 0; j < d; ++j)
              scaled(static_cast<Eigen::Index>(r), j) = root_t * (th[j] - truth.theta_star(j));
          }
          ks = ks_distance(scaled, truth.Lambda_star);
        }
        add_row(table, cfg, t, "ks_distance", ks, cfg.trials);
        break;
      }
      case ExperimentKind::CovError: {
        double sum = 0.0, sum_sq = 0.0;
        long valid = 0;
        for (std::size_t i = 0; i < M; ++i) {
          const double e = outputs[i].cov_error[c];
          if (!std::isfinite(e)) continue;
          sum += e;
          sum_sq += e * e;
          ++valid;
        }
        add_row(table, cfg, t, "lambda_error_fro", valid ? sum / valid : kNaN, cfg.trials);
        add_row(table, cfg, t, "lambda_error_fro_sq", valid ? sum_sq / valid : kNaN, cfg.trials);
        add_row(table, cfg, t, "valid_trials", static_cast<double>(valid), cfg.trials);
        break;
      }
      case ExperimentKind::Coverage: {
        const std::size_t width = du + 2;
        std::vector<long> hits(width, 0), valid(width, 0);
        for (std::size_t i = 0; i < M; ++i) {
          const signed char* row = outputs[i].covered.data() + c * width;
          for (std::size_t k = 0; k < width; ++k) {
            if (row[k] < 0) continue;
            ++valid[k];
            hits[k] += row[k];
          }
        }
        auto rate = [&](std::size_t k) {
          return valid[k] ? static_cast<double>(hits[k]) / static_cast<double>(valid[k]) : kNaN;
        };
        for (std::size_t j = 0; j < du; ++j)
          add_row(table, cfg, t, index_name("coverage_individual", static_cast<Eigen::Index>(j)), rate(j), cfg.trials);
        add_row(table, cfg, t, "coverage_simultaneous", rate(du), cfg.trials);
        add_row(table, cfg, t, "coverage_ellipsoid", rate(du + 1), cfg.trials);
        add_row(table, cfg, t, "valid_trials", static_cast<double>(valid[du]), cfg.trials);
        break;
      }
      default:
        break;
    }
    add_row(table, cfg, t, "diverged_trials", static_cast<double>(diverged), cfg.trials);
  }
  return table;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& k : kKindNames)
    if (k.kind == kind) return k.name;
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (const auto& k : kKindNames)
    if (name == k.name) return k.kind;
  throw DomainError("unknown experiment kind '" + name +
                    "' (expected l2-quantile, berry-esseen, cov-error, coverage, divergence, ground-truth)");
}

void ExperimentConfig::validate() const {
  if (horizon < 1) throw DomainError("config: horizon must be at least 1");
  if (trials < 1) throw DomainError("config: trials must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("config: delta must lie in (0, 1)");
  schedule.validate();
  if (kind == ExperimentKind::Coverage && n_sims < 100) throw DomainError("config: nsims must be at least 100");
  if (kind == ExperimentKind::BerryEsseen && trials < 10)
    throw DomainError("config: berry-esseen needs at least 10 trials");
  if (threads < 0) throw DomainError("config: threads must be non-negative");
  if (checkpoints) {
    if (checkpoints->grid == CheckpointSpec::Grid::Arithmetic && checkpoints->every < 1)
      throw DomainError("config: checkpoint interval must be positive");
    if (checkpoints->grid == CheckpointSpec::Grid::Geometric && checkpoints->per_decade < 1)
      throw DomainError("config: checkpoints per decade must be positive");
  }
}

std::vector<long> ExperimentConfig::checkpoint_grid() const {
  CheckpointSpec spec;
  if (checkpoints) {
    spec = *checkpoints;
  } else if (kind == ExperimentKind::Coverage || kind == ExperimentKind::RunTd ||
             kind == ExperimentKind::Divergence) {
    spec.grid = CheckpointSpec::Grid::Arithmetic;
  } else {
    spec.grid = CheckpointSpec::Grid::Geometric;
  }
  return spec.grid == CheckpointSpec::Grid::Arithmetic ? arithmetic_checkpoints(spec.every, horizon)
                                                       : geometric_checkpoints(spec.per_decade, horizon);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json mdp_json = {{"states", mdp.n_states}, {"dim", mdp.dim}, {"gamma", mdp.gamma}, {"eps", mdp.eps}};
  mdp_json["json_path"] = mdp.json_path ? nlohmann::json(*mdp.json_path) : nlohmann::json(nullptr);
  nlohmann::json cp = nullptr;
  if (checkpoints) {
    if (checkpoints->grid == CheckpointSpec::Grid::Arithmetic) {
      cp = {{"grid", "arithmetic"}, {"every", checkpoints->every}};
    } else {
      cp = {{"grid", "geometric"}, {"per_decade", checkpoints->per_decade}};
    }
  }
  return {{"experiment", to_string(kind)},
          {"mdp", mdp_json},
          {"eta0", schedule.eta0},
          {"alpha", schedule.alpha},
          {"horizon", horizon},
          {"trials", trials},
          {"seed", base_seed},
          {"checkpoints", cp},
          {"delta", delta},
          {"nsims", n_sims}};
}

std::vector<double> ResultTable::series(const std::string& statistic) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.statistic == statistic) out.push_back(r.value);
  return out;
}

std::vector<long> ResultTable::times(const std::string& statistic) const {
  std::vector<long> out;
  for (const auto& r : rows)
    if (r.statistic == statistic) out.push_back(r.t);
  return out;
}

double ResultTable::value(long t, const std::string& statistic) const {
  for (const auto& r : rows)
    if (r.t == t && r.statistic == statistic) return r.value;
  throw DomainError("result table has no '" + statistic + "' at t = " + std::to_string(t));
}

TabularMdp build_mdp(const MdpSpec& spec) {
  if (spec.json_path) {
    std::ifstream in(*spec.json_path);
    if (!in) throw DomainError("cannot open MDP file '" + *spec.json_path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DomainError("cannot parse MDP file '" + *spec.json_path + "': " + e.what());
    }
    return mdp_from_json(j);
  }
  return build_hard_mdp(spec.n_states, spec.dim, spec.gamma, spec.eps);
}

double adversarial_delta_bar(const StepSchedule& schedule, long horizon, double theta_star) {
  if (horizon < 1) throw DomainError("adversarial_delta_bar: horizon must be positive");
  double product = 1.0;
  double sum = 0.0;
  for (long t = 1; t <= horizon; ++t) {
    product *= 1.0 + 0.2 * stepsize(schedule, t);
    sum += product;
  }
  return (0.25 - theta_star) - 0.25 * sum / static_cast<double>(horizon);
}

ResultTable run_experiment(const ExperimentConfig& config) {
  config.validate();
  switch (config.kind) {
    case ExperimentKind::GroundTruth:
      return run_ground_truth(config);
    case ExperimentKind::Divergence:
      return run_divergence(config);
    case ExperimentKind::RunTd:
      return run_single_td(config);
    default:
      return run_monte_carlo(config);
  }
}

OutputFormat parse_output_format(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw DomainError("unknown output format '" + name + "' (expected csv or json)");
}

void write_csv(const ResultTable& table, std::ostream& out) {
  out << "experiment,t,statistic,value,trials,seed\n";
  for (const auto& r : table.rows) {
    out << r.experiment << ',' << r.t << ',' << r.statistic << ',' << format_double(r.value) << ',' << r.trials
        << ',' << r.seed << '\n';
  }
}

void write_json(const ResultTable& table, std::ostream& out) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"experiment", r.experiment},
                    {"t", r.t},
                    {"statistic", r.statistic},
                    {"value", std::isfinite(r.value) ? nlohmann::json(r.value) : nlohmann::json(nullptr)},
                    {"trials", r.trials},
                    {"seed", r.seed}});
  }
  const nlohmann::json doc = {{"header", table.header}, {"rows", std::move(rows)}};
  out << doc.dump(2) << '\n';
}

void emit(const ResultTable& table, OutputFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot open output file '" + path + "' for writing");
  if (format == OutputFormat::Csv) {
    write_csv(table, out);
  } else {
    write_json(table, out);
  }
  out.flush();
  if (!out) throw DomainError("failed writing output file '" + path + "'");
}

}  // namespace tdinf
