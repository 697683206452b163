#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "riskhjb/cli.hpp"

namespace {

// "201" or "41x41".
std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> nodes;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) nodes.push_back(std::stoi(part));
  return nodes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-sensitive asset management: HJB solver, Monte Carlo and Riccati checks"};
  app.set_version_flag("--version", riskhjb::kToolVersion);
  app.require_subcommand(1);

  riskhjb::CliOptions opts;
  std::string grid;
  double theta = 0.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", opts.config_path, "model configuration (YAML)")->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--grid", grid, "nodes per axis, N or NxN");
    cmd->add_option("--tmax-steps", opts.time_steps, "time steps");
    cmd->add_option("--theta", theta, "override the risk sensitivity");
  };
  auto add_sim = [&](CLI::App* cmd) {
    cmd->add_option("--paths", opts.paths, "Monte Carlo paths");
    cmd->add_option("--dt", opts.dt, "simulation step");
    cmd->add_option("--seed", opts.seed, "random seed");
    cmd->add_option("--x0", opts.x0, "initial factor state (default: box centre)");
    cmd->add_option("--artifacts", opts.artifacts_dir, "directory of a previous solve");
    cmd->add_option("--threads", opts.threads, "worker threads (RISKHJB_THREADS caps this)");
    cmd->add_flag("--antithetic", opts.antithetic, "antithetic Brownian increments");
  };

  auto* validate = app.add_subcommand("validate", "check the model assumptions");
  add_common(validate);
  auto* solve = app.add_subcommand("solve", "policy iteration on the HJB equation");
  add_common(solve);
  solve->add_flag("--oracle", opts.oracle, "compare with the Riccati solution (linear-Gaussian models)");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates for a policy");
  add_common(simulate);
  add_sim(simulate);
  simulate->add_option("--policy", opts.policy, "constant allocation h");
  simulate->add_option("--dump-paths", opts.dump_paths, "write this many factor paths to sample_paths.csv");
  auto* verify = app.add_subcommand("verify", "Monte Carlo verification of a solve");
  add_common(verify);
  add_sim(verify);
  auto* oracle = app.add_subcommand("oracle", "Riccati solution of a linear-Gaussian model");
  add_common(oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : riskhjb::kExitParse;
  }
  opts.command = app.get_subcommands().front()->get_name();
  if (theta != 0.0) opts.theta = theta;
  try {
    if (!grid.empty()) opts.grid = parse_grid(grid);
  } catch (const std::exception&) {
    std::cerr << "error: --grid expects N or NxN\n";
    return riskhjb::kExitParse;
  }
  return riskhjb::run_command(opts, std::cerr);
}
