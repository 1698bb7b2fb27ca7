#include "cli.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>
#include <vector>

namespace {

using iceritz::cli::RunConfig;

// Pre-scan for --config so file values become the defaults the flags override.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

std::vector<std::pair<double, double>> parse_pairs(const std::string& text) {
  std::vector<std::pair<double, double>> pairs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw CLI::ValidationError("--pairs", "expected alpha:beta[,alpha:beta...]");
    pairs.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
  }
  if (pairs.empty()) throw CLI::ValidationError("--pairs", "no pairs given");
  return pairs;
}

void add_common_options(CLI::App* cmd, RunConfig& config, std::string& config_path,
                        std::string& pairs_text) {
  cmd->add_option("--config", config_path, "JSON config file; flags override its values");
  cmd->add_option("--problem", config.problem,
                  "problem name: mms1d-p2 | mms2d-p<value> | grid:<bed>[,<thk>[,<srf>]]");
  cmd->add_option("--layers", config.hidden_layers, "hidden layer widths")->delimiter(',');
  cmd->add_option("--p", config.p, "flow-law exponent for grid problems (p >= 2)");
  cmd->add_option("--alpha", config.alpha, "obstacle penalty weight");
  cmd->add_option("--beta", config.beta, "boundary penalty weight");
  cmd->add_option("--iters", config.iterations, "training iterations");
  cmd->add_option("--lr", config.lr, "base learning rate");
  cmd->add_option("--lr-drop1", config.lr_drop1, "first halving iteration");
  cmd->add_option("--lr-drop2", config.lr_drop2, "second halving iteration");
  cmd->add_option("--batch", config.batch_interior, "interior collocation points per iteration");
  cmd->add_option("--batch-boundary", config.batch_boundary, "boundary points per iteration");
  cmd->add_option("--seed", config.seed, "random seed");
  cmd->add_flag("--deterministic,!--no-deterministic", config.deterministic,
                "serial drivers (runs are bit-reproducible either way)");
  cmd->add_option("--sampling", config.sampling,
                  "resample | fixed-random | fixed-grid | pooled-grid");
  cmd->add_option("--pool", config.pool_size, "pooled-grid collocation pool size");
  cmd->add_option("--error-every", config.error_every, "L1-error tracking cadence (0 = off)");
  cmd->add_option("--error-grid", config.error_grid, "evaluation grid points per axis");
  cmd->add_option("--checkpoint-every", config.checkpoint_every, "checkpoint cadence (0 = final only)");
  cmd->add_option("--out", config.out_dir, "output directory");
  cmd->add_option("--cells", config.cells, "oracle grid cells (per axis in 2D)");
  cmd->add_option("--pairs", pairs_text, "sweep pairs alpha:beta[,alpha:beta...]");
  cmd->add_option("--workers", config.workers, "parallel runs (with --no-deterministic)");
  cmd->add_option("--bedrock", config.bedrock_path, "bedrock elevation grid (.asc)");
  cmd->add_option("--thickness", config.thickness_path, "ice thickness grid (.asc)");
  cmd->add_option("--surface", config.surface_path, "surface elevation grid for benchmarks (.asc)");
  cmd->add_option("--downsample", config.downsample_factor, "grid downsample factor");
  cmd->add_option("--pretrain-iters", config.pretrain_iterations, "bedrock-fit iterations");
  cmd->add_flag("--drift-from-bedrock", config.drift_from_bedrock,
                "use the bedrock gradient as the drift field");
  cmd->add_option("--value-scale", config.value_scale, "elevation scaling into network units");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural energy-minimization solver for ice-sheet obstacle problems"};
  app.require_subcommand(1);

  RunConfig config;
  const std::string config_path = find_config_path(argc, argv);
  if (!config_path.empty()) {
    try {
      config = iceritz::cli::load_config_file(config_path);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return iceritz::cli::kExitUsageError;
    }
  }

  std::string config_path_sink, pairs_text;
  auto* train = app.add_subcommand("train", "train a network on one problem");
  auto* sweep = app.add_subcommand("sweep", "train once per alpha:beta pair, tabulate errors");
  auto* greenland = app.add_subcommand("greenland", "two-stage gridded-data pipeline");
  auto* oracle = app.add_subcommand("oracle", "classical finite-difference solve");
  for (CLI::App* cmd : {train, sweep, greenland, oracle})
    add_common_options(cmd, config, config_path_sink, pairs_text);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return iceritz::cli::kExitUsageError;
  }

  try {
    if (!pairs_text.empty()) config.pairs = parse_pairs(pairs_text);
    if (train->parsed()) return iceritz::cli::cmd_train(config);
    if (sweep->parsed()) return iceritz::cli::cmd_sweep(config);
    if (greenland->parsed()) return iceritz::cli::cmd_greenland(config);
    if (oracle->parsed()) return iceritz::cli::cmd_oracle(config);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return iceritz::cli::kExitUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return iceritz::cli::kExitDomainError;
  }
  return iceritz::cli::kExitUsageError;
}
