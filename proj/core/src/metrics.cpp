#include "iceritz/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace iceritz {

EvalGrid EvalGrid::line(double lo, double hi, int n) {
  if (n < 2) throw std::invalid_argument("evaluation grid needs at least two points");
  EvalGrid g;
  g.points.resize(1, n);
  for (int i = 0; i < n; ++i) g.points(0, i) = lo + (hi - lo) * i / (n - 1);
  return g;
}

EvalGrid EvalGrid::box(const Domain& domain, int per_axis) {
  if (domain.dim() == 1) return line(domain.lo(0), domain.hi(0), per_axis);
  if (per_axis < 2) throw std::invalid_argument("evaluation grid needs at least two points");
  EvalGrid g;
  g.points.resize(2, per_axis * per_axis);
  for (int j = 0; j < per_axis; ++j)
    for (int i = 0; i < per_axis; ++i) {
      const int c = j * per_axis + i;
      g.points(0, c) = domain.lo(0) + (domain.hi(0) - domain.lo(0)) * i / (per_axis - 1);
      g.points(1, c) = domain.lo(1) + (domain.hi(1) - domain.lo(1)) * j / (per_axis - 1);
    }
  return g;
}

EvalGrid EvalGrid::standard(const Domain& domain, int per_axis) {
  if (per_axis > 0) return box(domain, per_axis);
  return domain.dim() == 1 ? line(domain.lo(0), domain.hi(0), 1001) : box(domain, 256);
}

ErrorReport l1_error(const RowVector& pred, const RowVector& exact) {
  if (pred.size() != exact.size() || pred.size() == 0)
    throw std::invalid_argument("field sample size mismatch or empty grid");
  ErrorReport r;
  r.grid_points = pred.size();
  r.l1 = (pred - exact).cwiseAbs().mean();
  const double denom = exact.cwiseAbs().mean();
  r.relative = denom > 0.0 ? r.l1 / denom : r.l1;
  return r;
}

namespace {
constexpr int kEvalChunk = 8192;
}

ErrorReport l1_error(const Network& net, const ScalarField& exact, const EvalGrid& grid) {
  const int n = grid.size();
  if (n == 0) throw std::invalid_argument("empty evaluation grid");
  RowVector pred(n), truth(n);
  for (int start = 0; start < n; start += kEvalChunk) {
    const int len = std::min(kEvalChunk, n - start);
    pred.segment(start, len) = net.evaluate(grid.points.middleCols(start, len));
  }
  for (int i = 0; i < n; ++i) truth(i) = exact(grid.points.col(i));
  return l1_error(pred, truth);
}

ErrorReport l1_error(const ScalarField& pred, const ScalarField& exact, const EvalGrid& grid) {
  const int n = grid.size();
  if (n == 0) throw std::invalid_argument("empty evaluation grid");
  RowVector a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a(i) = pred(grid.points.col(i));
    b(i) = exact(grid.points.col(i));
  }
  return l1_error(a, b);
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("slope fit needs at least two points");
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::invalid_argument("slope fit needs positive data");
    lx[i] = std::log10(x[i]);
    ly[i] = std::log10(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("slope fit needs distinct x values");
  return sxy / sxx;
}

ScalingResult scaling_study_with_runner(
    const std::vector<long>& counts, const std::vector<std::uint64_t>& seeds,
    const std::function<double(long, std::uint64_t)>& runner, int workers) {
  if (counts.size() < 2) throw std::invalid_argument("study needs at least two sample counts");
  if (seeds.empty()) throw std::invalid_argument("study needs at least one seed");

  ScalingResult result;
  result.table.resize(counts.size() * seeds.size());

  auto run_one = [&](std::size_t idx) {
    const long n = counts[idx / seeds.size()];
    const std::uint64_t seed = seeds[idx % seeds.size()];
    ScalingPoint pt;
    pt.sample_count = n;
    pt.seed = seed;
    try {
      pt.relative_error = runner(n, seed);
      pt.failed = !std::isfinite(pt.relative_error) || pt.relative_error <= 0.0;
    } catch (const std::exception&) {
      pt.failed = true;
    }
    result.table[idx] = pt;
  };

  const std::size_t jobs = result.table.size();
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) run_one(i);
      });
    for (std::thread& t : pool) t.join();
  }

  // seed-averaged error per count, then the regression through the averages
  std::vector<double> xs, ys;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    double sum = 0.0;
    int ok = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const ScalingPoint& pt = result.table[c * seeds.size() + s];
      if (pt.failed) {
        result.complete = false;
        continue;
      }
      sum += pt.relative_error;
      ++ok;
    }
    result.counts.push_back(counts[c]);
    if (ok > 0) {
      result.mean_error.push_back(sum / ok);
      xs.push_back(static_cast<double>(counts[c]));
      ys.push_back(sum / ok);
    } else {
      result.mean_error.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  result.slope = fit_loglog_slope(xs, ys);
  return result;
}

ScalingResult scaling_study(const MmsProblem& problem, const ScalingConfig& config) {
  std::vector<long> counts = config.sample_counts;
  if (counts.empty())
    for (int k = 6; k <= 14; ++k) counts.push_back(1L << k);
  std::sort(counts.begin(), counts.end());

  std::vector<int> sizes = config.layer_sizes;
  if (sizes.empty()) {
    sizes.push_back(problem.spec.domain.dim());
    for (int i = 0; i < 5; ++i) sizes.push_back(128);
    sizes.push_back(1);
  }

  auto runner = [&](long n, std::uint64_t seed) {
    Network net = Network::init(seed, sizes);
    TrainConfig cfg = config.base;
    cfg.seed = seed;
    cfg.n_interior = static_cast<int>(n);
    cfg.error_every = 0;  // only the final error matters here
    const TrainReport rep = train(net, problem.spec, cfg, problem.exact);
    if (rep.aborted) throw std::runtime_error("training aborted: " + rep.abort_reason);
    return rep.final_relative_l1;
  };

  int workers = config.workers;
  if (config.base.deterministic)
    workers = 1;
  else if (workers <= 0)
    workers = std::max(1u, std::thread::hardware_concurrency());
  return scaling_study_with_runner(counts, config.seeds, runner, workers);
}

void write_scaling_csv(std::ostream& out, const ScalingResult& result) {
  out << "n,seed,relative_error\n";
  char buf[64];
  for (const ScalingPoint& pt : result.table) {
    out << pt.sample_count << ',' << pt.seed << ',';
    if (pt.failed) {
      out << "failed";
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g", pt.relative_error);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace iceritz
