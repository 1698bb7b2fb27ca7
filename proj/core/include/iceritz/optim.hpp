#pragma once

#include "iceritz/energy.hpp"
#include "iceritz/nnet.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace iceritz {

struct AdamParams {
  double beta1 = 0.9;
  // 0.99 rather than the textbook 0.999: the obstacle penalty produces huge
  // early gradients whose second-moment memory otherwise throttles the whole
  // optimization for ~1000 iterations.
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Adam moment accumulators, parameter-shaped.
struct AdamState {
  ParamGradient first_moment;
  ParamGradient second_moment;
  long step = 0;

  static AdamState for_network(const Network& net);
};

/// Staged learning rate: base until drop1, half until drop2, quarter after.
struct LrSchedule {
  double base = 5e-4;
  long drop1 = 500;
  long drop2 = 750;
};

double lr_at(long iteration, const LrSchedule& schedule);
inline double lr_at(long iteration, double base) { return lr_at(iteration, LrSchedule{base, 500, 750}); }

/// One Adam update with bias correction. Throws on non-finite gradients
/// before touching any parameter.
void adam_step(Network& net, const ParamGradient& grad, AdamState& state, double lr,
               const AdamParams& params = {});

enum class SamplingMode {
  resample,      // fresh iid batch per iteration (counter-derived stream)
  fixed_random,  // one iid batch drawn up front, reused every iteration
  fixed_grid,    // midpoint-lattice collocation, reused every iteration
  pooled_grid,   // midpoint-lattice pool, random subset per iteration
};

struct TrainConfig {
  long iterations = 2000;
  LrSchedule lr;
  int n_interior = 1024;
  int n_boundary = 256;
  std::uint64_t seed = 1;
  bool deterministic = true;  // serial drivers; runs are reproducible either way
  SamplingMode sampling = SamplingMode::resample;
  int pool_size = 0;  // pooled_grid collocation pool; 0 = 16 * n_interior
  AdamParams adam;

  // L1-error tracking against a known exact solution.
  long error_every = 1;    // 0 disables tracking during training
  int error_grid = 0;      // points per axis; 0 = 1001 in 1D, 256 in 2D

  // Optional periodic checkpointing (atomic write-then-rename).
  long checkpoint_every = 0;
  std::string checkpoint_path;
};

struct TrainReport {
  std::vector<LossBreakdown> losses;  // one entry per completed iteration
  std::vector<double> lr;             // learning rate used at each iteration
  std::vector<double> l1_error;       // NaN where not evaluated; empty if no exact
  double final_l1 = std::numeric_limits<double>::quiet_NaN();
  double final_relative_l1 = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  bool aborted = false;
  std::string abort_reason;

  long iterations() const { return static_cast<long>(losses.size()); }
};

/// Main loop: sample batch -> loss and gradient -> Adam step, recording the
/// loss breakdown each iteration and the L1 error against `exact` when given.
TrainReport train(Network& net, const ProblemSpec& spec, const TrainConfig& config,
                  const ScalarField& exact = nullptr);

struct PretrainReport {
  std::vector<double> mse;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

/// Plain least-squares fit of the network to a target field over uniform
/// batches; used to initialize data runs from the bedrock before the energy
/// training stage.
PretrainReport pretrain(Network& net, const Domain& domain, const ScalarField& target,
                        const TrainConfig& config);

/// CSV emission: iteration,loss1,loss2,loss3,total,l1_error,lr.
void write_train_report_csv(std::ostream& out, const TrainReport& report);

}  // namespace iceritz
