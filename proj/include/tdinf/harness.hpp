#pragma once

// Seeded multi-trial experiments on top of td/covest/inference/metrics.
//
// Trial i draws its samples from seed base_seed + i and its l_inf quantile
// simulations from base_seed + trials + i. Trials run on a thread pool but
// every reduction happens in trial order after all workers finish, so the
// output does not depend on the thread count.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdinf/mdp.hpp"
#include "tdinf/td.hpp"

namespace tdinf {

enum class ExperimentKind { L2Quantile, BerryEsseen, CovError, Coverage, Divergence, GroundTruth, RunTd };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct CheckpointSpec {
  enum class Grid { Arithmetic, Geometric };
  Grid grid = Grid::Arithmetic;
  long every = 100;
  int per_decade = 20;
};

struct MdpSpec {
  int n_states = 10;
  int dim = 3;
  double gamma = 0.2;
  double eps = 0.01;
  std::optional<std::string> json_path;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Coverage;
  MdpSpec mdp;
  StepSchedule schedule;
  long horizon = 100000;
  long trials = 1000;
  std::uint64_t base_seed = 1;
  /// Unset: arithmetic every 100 for coverage/run-td/divergence, geometric
  /// 20 per decade otherwise.
  std::optional<CheckpointSpec> checkpoints;
  double delta = 0.05;
  long n_sims = 100000;
  /// 0 picks std::thread::hardware_concurrency().
  int threads = 0;

  void validate() const;
  std::vector<long> checkpoint_grid() const;
  /// Echo of every field that affects the output (threads excluded).
  nlohmann::json to_json() const;
};

struct ResultRow {
  std::string experiment;
  long t = 0;
  std::string statistic;
  double value = 0;
  long trials = 0;
  std::uint64_t seed = 0;
};

struct ResultTable {
  nlohmann::json header = nlohmann::json::object();
  std::vector<ResultRow> rows;

  /// Values of one statistic in checkpoint order.
  std::vector<double> series(const std::string& statistic) const;
  std::vector<long> times(const std::string& statistic) const;
  /// Throws DomainError if absent.
  double value(long t, const std::string& statistic) const;
};

/// The configured instance: JSON file if given, the hard family otherwise.
TabularMdp build_mdp(const MdpSpec& spec);

ResultTable run_experiment(const ExperimentConfig& config);

/// theta_bar_T - theta* on the divergence instance when every sample is the
/// adversarial tuple (A_t = -0.2, b_t = -0.05), starting from theta_0 = 0:
///   (0.25 - theta*) - 0.25 (1/T) sum_{t<=T} prod_{k<=t} (1 + 0.2 eta_k).
double adversarial_delta_bar(const StepSchedule& schedule, long horizon, double theta_star);

enum class OutputFormat { Csv, Json };
OutputFormat parse_output_format(const std::string& name);

/// CSV columns: experiment,t,statistic,value,trials,seed (17 significant
/// digits). JSON: {"header": ..., "rows": [...]}, non-finite values as null.
void write_csv(const ResultTable& table, std::ostream& out);
void write_json(const ResultTable& table, std::ostream& out);
void emit(const ResultTable& table, OutputFormat format, const std::string& path);

}  // namespace tdinf
