#include <CLI11.hpp>
#include <iostream>

#include "mtq/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = mtq::cli;
  CLI::App app{"Many-server queue with abandonment: fluid and diffusion limits, exact simulation, validation"};
  app.require_subcommand(1);

  std::string config, out = "out";
  unsigned threads = 0;

  auto* fluid = app.add_subcommand("fluid", "Solve the fluid equation and report the equilibrium");
  cli::FluidOptionsCli fluid_opt;
  fluid->add_option("config", config, "Run configuration (JSON)")->required();
  fluid->add_option("--out", out, "Output directory");
  fluid->add_option("--horizon", fluid_opt.horizon, "Override the horizon");
  fluid->add_option("--grid-step", fluid_opt.grid_step, "Override the output grid step");
  fluid->add_option("--tol", fluid_opt.tol, "Override the solver tolerance");

  auto* simulate = app.add_subcommand("simulate", "Simulate the n-th system by thinning");
  cli::SimulateOptions sim_opt;
  simulate->add_option("config", config, "Run configuration (JSON)")->required();
  simulate->add_option("--out", out, "Output directory");
  simulate->add_option("--n", sim_opt.n, "Scaling index n");
  simulate->add_option("--reps", sim_opt.reps, "Number of replications");
  simulate->add_option("--seed", sim_opt.seed, "Base seed; replication r uses stream r");
  simulate->add_option("--dump-paths", sim_opt.dump_paths, "Write event logs of the first N replications");
  simulate->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* diffusion = app.add_subcommand("diffusion", "Euler-Maruyama paths of the diffusion limit");
  cli::DiffusionOptions dif_opt;
  diffusion->add_option("config", config, "Run configuration (JSON)")->required();
  diffusion->add_option("--out", out, "Output directory");
  diffusion->add_option("--dt", dif_opt.dt, "Time step");
  diffusion->add_option("--paths", dif_opt.paths, "Number of paths");
  diffusion->add_option("--seed", dif_opt.seed, "Base seed; path r uses stream r");
  diffusion->add_option("--x0", dif_opt.x0, "Initial value (defaults to model.x0)");
  diffusion->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* stationary = app.add_subcommand("stationary", "Closed-form stationary limit law");
  cli::StationaryArgs st_args;
  std::string st_out;
  stationary->add_option("config", config, "Run configuration (JSON); flags are used when omitted");
  stationary->add_option("--lambda", st_args.lambda, "Arrival rate");
  stationary->add_option("--mu", st_args.mu, "Service rate");
  stationary->add_option("--theta", st_args.theta, "Abandonment rate");
  stationary->add_option("--alpha", st_args.alpha, "Arrival-rate correction alpha");
  stationary->add_option("--q0", st_args.q0, "Initial fluid level");
  stationary->add_option("--out", st_out, "Output directory for law.json");

  auto* validate = app.add_subcommand("validate", "Run the checks of an experiment file");
  validate->add_option("experiment", config, "Experiment (JSON)")->required();
  validate->add_option("--out", out, "Output directory");
  validate->add_option("--threads", threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fluid) return cli::cmd_fluid(config, out, fluid_opt, std::cout);
    if (*simulate) {
      sim_opt.threads = threads;
      return cli::cmd_simulate(config, out, sim_opt, std::cout);
    }
    if (*diffusion) {
      dif_opt.threads = threads;
      return cli::cmd_diffusion(config, out, dif_opt, std::cout);
    }
    if (*stationary) {
      const auto args = config.empty() ? st_args : cli::stationary_args_from_config(config);
      return cli::cmd_stationary(args, st_out.empty() ? std::nullopt : std::optional<std::filesystem::path>(st_out),
                                 std::cout);
    }
    if (*validate) return cli::cmd_validate(config, out, threads, std::cout);
  } catch (const std::exception& e) {
    // Config, usage and solver errors alike.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
