// tdinf: TD learning with Polyak-Ruppert averaging, plug-in covariance
// estimation and confidence regions on tabular MDPs.
//
//   tdinf ground-truth [--states N --dim D --gamma G --eps E | --mdp-json F]
//   tdinf run-td       [...] --horizon T --seed S
//   tdinf experiment <kind> [...]
//
// Every flag can also be set through an environment variable TDINF_<FLAG>,
// e.g. TDINF_HORIZON=1000.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "tdinf/harness.hpp"

namespace {

struct CliOptions {
  tdinf::ExperimentConfig config;
  long checkpoint_every = 0;
  int checkpoints_per_decade = 0;
  std::string mdp_json;
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App& cmd, CliOptions& o, bool stochastic) {
  auto& c = o.config;
  cmd.add_option("--states", c.mdp.n_states, "Number of states of the hard MDP")->envname("TDINF_STATES");
  cmd.add_option("--dim", c.mdp.dim, "Feature dimension d (odd, >= 3)")->envname("TDINF_DIM");
  cmd.add_option("--gamma", c.mdp.gamma, "Discount factor")->envname("TDINF_GAMMA");
  cmd.add_option("--eps", c.mdp.eps, "Kernel perturbation epsilon")->envname("TDINF_EPS");
  cmd.add_option("--mdp-json", o.mdp_json, "Load the MDP from a JSON file instead")
      ->envname("TDINF_MDP_JSON")
      ->check(CLI::ExistingFile);
  cmd.add_option("--out", o.out, "Output path (stdout if omitted)")->envname("TDINF_OUT");
  cmd.add_option("--format", o.format, "Output format")
      ->envname("TDINF_FORMAT")
      ->check(CLI::IsMember({"csv", "json"}));
  if (!stochastic) return;

  cmd.add_option("--eta0", c.schedule.eta0, "Initial stepsize")->envname("TDINF_ETA0");
  cmd.add_option("--alpha", c.schedule.alpha, "Stepsize decay exponent in [1/2, 1)")->envname("TDINF_ALPHA");
  cmd.add_option("--horizon", c.horizon, "Number of TD iterations T")->envname("TDINF_HORIZON");
  cmd.add_option("--trials", c.trials, "Number of independent trials")->envname("TDINF_TRIALS");
  cmd.add_option("--seed", c.base_seed, "Base seed")->envname("TDINF_SEED");
  cmd.add_option("--delta", c.delta, "Miscoverage level")->envname("TDINF_DELTA");
  cmd.add_option("--nsims", c.n_sims, "Draws for the simulated l_inf quantile")->envname("TDINF_NSIMS");
  auto* every = cmd.add_option("--checkpoint-every", o.checkpoint_every, "Record every k iterations")
                    ->envname("TDINF_CHECKPOINT_EVERY");
  auto* decade = cmd.add_option("--checkpoints-per-decade", o.checkpoints_per_decade,
                                "Record on a geometric grid with this many points per decade")
                     ->envname("TDINF_CHECKPOINTS_PER_DECADE");
  every->excludes(decade);
  cmd.add_option("--threads", c.threads, "Worker threads (0 = all cores)")->envname("TDINF_THREADS");
}

void finish(CliOptions& o) {
  if (!o.mdp_json.empty()) o.config.mdp.json_path = o.mdp_json;
  if (o.checkpoint_every > 0) {
    o.config.checkpoints = tdinf::CheckpointSpec{tdinf::CheckpointSpec::Grid::Arithmetic, o.checkpoint_every, 20};
  } else if (o.checkpoints_per_decade > 0) {
    o.config.checkpoints =
        tdinf::CheckpointSpec{tdinf::CheckpointSpec::Grid::Geometric, 100, o.checkpoints_per_decade};
  }
  const tdinf::ResultTable table = tdinf::run_experiment(o.config);
  const tdinf::OutputFormat format = tdinf::parse_output_format(o.format);
  if (o.out.empty()) {
    if (format == tdinf::OutputFormat::Csv) {
      tdinf::write_csv(table, std::cout);
    } else {
      tdinf::write_json(table, std::cout);
    }
  } else {
    tdinf::emit(table, format, o.out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TD learning inference toolkit"};
  app.require_subcommand(1);

  CliOptions opts;
  std::string kind;

  auto* gt = app.add_subcommand("ground-truth", "Exact A, b, Sigma, theta*, Gamma, Lambda* of an MDP");
  add_common(*gt, opts, false);

  auto* run = app.add_subcommand("run-td", "Single averaged TD run; prints theta_bar at each checkpoint");
  add_common(*run, opts, true);

  auto* exp = app.add_subcommand("experiment", "Monte Carlo experiment");
  exp->add_option("kind", kind, "l2-quantile | berry-esseen | cov-error | coverage | divergence | ground-truth")
      ->required()
      ->check(CLI::IsMember({"l2-quantile", "berry-esseen", "cov-error", "coverage", "divergence", "ground-truth"}));
  add_common(*exp, opts, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gt->parsed()) {
      opts.config.kind = tdinf::ExperimentKind::GroundTruth;
    } else if (run->parsed()) {
      opts.config.kind = tdinf::ExperimentKind::RunTd;
      opts.config.trials = 1;
    } else {
      opts.config.kind = tdinf::parse_experiment_kind(kind);
    }
    finish(opts);
  } catch (const std::exception& e) {
    std::cerr << "tdinf: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
