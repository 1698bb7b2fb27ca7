#pragma once

#include "iceritz/optim.hpp"
#include "iceritz/problems.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace iceritz {

/// Uniform evaluation grid, endpoints included.
struct EvalGrid {
  Matrix points;  // d x n

  int size() const { return static_cast<int>(points.cols()); }
  static EvalGrid line(double lo, double hi, int n);
  static EvalGrid box(const Domain& domain, int per_axis);
  /// Default spec grid for a domain: 1001-point line in 1D, 256x256 in 2D.
  static EvalGrid standard(const Domain& domain, int per_axis = 0);
};

struct ErrorReport {
  double l1 = 0.0;        // mean absolute difference over the grid
  double relative = 0.0;  // l1 divided by mean |exact|
  long grid_points = 0;
  long sample_count = 0;  // collocation count of the run that produced pred
};

ErrorReport l1_error(const RowVector& pred, const RowVector& exact);
ErrorReport l1_error(const Network& net, const ScalarField& exact, const EvalGrid& grid);
ErrorReport l1_error(const ScalarField& pred, const ScalarField& exact, const EvalGrid& grid);

/// Least-squares slope of log10(y) against log10(x). Exact power laws give
/// the exact exponent.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingPoint {
  long sample_count = 0;
  std::uint64_t seed = 0;
  double relative_error = 0.0;
  bool failed = false;
};

struct ScalingResult {
  std::vector<ScalingPoint> table;       // one row per (count, seed)
  std::vector<long> counts;              // distinct counts, ascending
  std::vector<double> mean_error;        // seed-averaged error per count
  double slope = 0.0;
  bool complete = true;                  // false if any run failed
};

struct ScalingConfig {
  std::vector<long> sample_counts;  // default 2^6 .. 2^14
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<int> layer_sizes;     // default [d, 128 x5, 1]
  TrainConfig base;                 // iterations / lr / sampling mode
  int workers = 0;                  // 0 = hardware concurrency (ignored when base.deterministic)
};

/// Runs the error-vs-sample-count study: trains one network per
/// (count, seed), records the final relative L1 error, and fits the log-log
/// slope through the seed-averaged points.
ScalingResult scaling_study(const MmsProblem& problem, const ScalingConfig& config);

/// Same study with an injected runner (count, seed) -> relative error;
/// the training-free path used by tests and by synthetic sanity checks.
ScalingResult scaling_study_with_runner(
    const std::vector<long>& counts, const std::vector<std::uint64_t>& seeds,
    const std::function<double(long, std::uint64_t)>& runner, int workers = 1);

/// CSV emission, long format: n,seed,relative_error.
void write_scaling_csv(std::ostream& out, const ScalingResult& result);

}  // namespace iceritz
