#pragma once

#include "iceritz/geodata.hpp"
#include "iceritz/metrics.hpp"
#include "iceritz/optim.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace iceritz::cli {

/// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsageError = 2;

/// Flat run configuration mirrored 1:1 by the JSON config file and the
/// command-line flags (flags override file values).
struct RunConfig {
  std::string problem;  // mms1d-p2 | mms2d-p<value> | grid:<bed>[,<thk>[,<srf>]]
  std::vector<int> hidden_layers;  // widths; empty = 5 x 128 (2D grid runs: 15 x 320)
  double p = 3.0;                  // exponent for grid-backed problems
  double alpha = 4000.0;
  double beta = 4000.0;
  long iterations = 2000;
  double lr = 5e-4;
  long lr_drop1 = 500;
  long lr_drop2 = 750;
  int batch_interior = 1024;
  int batch_boundary = 256;
  std::uint64_t seed = 1;
  bool deterministic = true;
  std::string sampling = "resample";  // resample | fixed-random | fixed-grid | pooled-grid
  int pool_size = 0;                   // pooled-grid collocation pool (0 = 16x batch)
  long error_every = 1;
  int error_grid = 0;
  long checkpoint_every = 0;
  std::string out_dir = "run";

  // oracle
  int cells = 1024;

  // sweep
  std::vector<std::pair<double, double>> pairs;
  int workers = 0;

  // greenland
  std::string bedrock_path, thickness_path, surface_path;
  int downsample_factor = 1;
  long pretrain_iterations = 2000;
  bool drift_from_bedrock = false;
  double value_scale = kElevationScale;
};

/// Strict JSON load: unknown keys are rejected.
RunConfig load_config_file(const std::string& path);
void merge_json_into(RunConfig& config, const std::string& json_text);
std::string to_json(const RunConfig& config);

SamplingMode parse_sampling(const std::string& name);
TrainConfig train_config_from(const RunConfig& config);

struct TrainOutcome {
  TrainReport report;
  double final_relative_error = std::numeric_limits<double>::quiet_NaN();
  bool has_exact = false;
};

/// Subcommands. Each writes its artifacts under config.out_dir and returns an
/// exit code; invalid configurations throw std::invalid_argument (mapped to
/// the usage exit code by the callers in main).
int cmd_train(const RunConfig& config);
int cmd_sweep(const RunConfig& config);
int cmd_greenland(const RunConfig& config);
int cmd_oracle(const RunConfig& config);

/// Inner train run shared by cmd_train and cmd_sweep; artifacts land in
/// out_dir. Exposed for tests and the acceptance suite.
TrainOutcome run_training(const RunConfig& config, const std::string& out_dir);

}  // namespace iceritz::cli
