#include "cli.hpp"

#include "iceritz/oracle.hpp"
#include "iceritz/problems.hpp"

#include "json.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace iceritz::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

RowVector evaluate_chunked(const Network& net, const Matrix& points) {
  constexpr int kChunk = 8192;
  const int n = static_cast<int>(points.cols());
  RowVector values(n);
  for (int start = 0; start < n; start += kChunk) {
    const int len = std::min(kChunk, n - start);
    values.segment(start, len) = net.evaluate(points.middleCols(start, len));
  }
  return values;
}

json breakdown_json(const LossBreakdown& lb) {
  return json{{"loss1", lb.loss1}, {"loss2", lb.loss2}, {"loss3", lb.loss3}, {"total", lb.total}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config IO

namespace {

template <typename T>
void pick(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void merge_json_into(RunConfig& c, const std::string& text) {
  json j = json::parse(text);
  static const std::set<std::string> known = {
      "problem",     "hidden_layers", "p",           "alpha",          "beta",
      "iterations",  "lr",            "lr_drop1",    "lr_drop2",       "batch_interior",
      "batch_boundary", "seed",       "deterministic", "sampling",     "pool_size", "error_every",
      "error_grid",  "checkpoint_every", "out_dir",  "cells",          "pairs",
      "workers",     "bedrock_path",  "thickness_path", "surface_path", "downsample_factor",
      "pretrain_iterations", "drift_from_bedrock", "value_scale"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("unknown config key '" + it.key() + "'");

  pick(j, "problem", c.problem);
  pick(j, "hidden_layers", c.hidden_layers);
  pick(j, "p", c.p);
  pick(j, "alpha", c.alpha);
  pick(j, "beta", c.beta);
  pick(j, "iterations", c.iterations);
  pick(j, "lr", c.lr);
  pick(j, "lr_drop1", c.lr_drop1);
  pick(j, "lr_drop2", c.lr_drop2);
  pick(j, "batch_interior", c.batch_interior);
  pick(j, "batch_boundary", c.batch_boundary);
  pick(j, "seed", c.seed);
  pick(j, "deterministic", c.deterministic);
  pick(j, "sampling", c.sampling);
  parse_sampling(c.sampling);  // validate eagerly
  pick(j, "pool_size", c.pool_size);
  pick(j, "error_every", c.error_every);
  pick(j, "error_grid", c.error_grid);
  pick(j, "checkpoint_every", c.checkpoint_every);
  pick(j, "out_dir", c.out_dir);
  pick(j, "cells", c.cells);
  pick(j, "workers", c.workers);
  pick(j, "bedrock_path", c.bedrock_path);
  pick(j, "thickness_path", c.thickness_path);
  pick(j, "surface_path", c.surface_path);
  pick(j, "downsample_factor", c.downsample_factor);
  pick(j, "pretrain_iterations", c.pretrain_iterations);
  pick(j, "drift_from_bedrock", c.drift_from_bedrock);
  pick(j, "value_scale", c.value_scale);
  if (j.contains("pairs")) {
    c.pairs.clear();
    for (const auto& pr : j.at("pairs"))
      c.pairs.emplace_back(pr.at(0).get<double>(), pr.at(1).get<double>());
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c;
  merge_json_into(c, ss.str());
  return c;
}

std::string to_json(const RunConfig& c) {
  json j;
  j["problem"] = c.problem;
  j["hidden_layers"] = c.hidden_layers;
  j["p"] = c.p;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["iterations"] = c.iterations;
  j["lr"] = c.lr;
  j["lr_drop1"] = c.lr_drop1;
  j["lr_drop2"] = c.lr_drop2;
  j["batch_interior"] = c.batch_interior;
  j["batch_boundary"] = c.batch_boundary;
  j["seed"] = c.seed;
  j["deterministic"] = c.deterministic;
  j["sampling"] = c.sampling;
  j["pool_size"] = c.pool_size;
  j["error_every"] = c.error_every;
  j["error_grid"] = c.error_grid;
  j["checkpoint_every"] = c.checkpoint_every;
  j["out_dir"] = c.out_dir;
  j["cells"] = c.cells;
  j["pairs"] = json::array();
  for (const auto& pr : c.pairs) j["pairs"].push_back({pr.first, pr.second});
  j["workers"] = c.workers;
  j["bedrock_path"] = c.bedrock_path;
  j["thickness_path"] = c.thickness_path;
  j["surface_path"] = c.surface_path;
  j["downsample_factor"] = c.downsample_factor;
  j["pretrain_iterations"] = c.pretrain_iterations;
  j["drift_from_bedrock"] = c.drift_from_bedrock;
  j["value_scale"] = c.value_scale;
  return j.dump(2) + "\n";
}

SamplingMode parse_sampling(const std::string& name) {
  if (name == "resample") return SamplingMode::resample;
  if (name == "fixed-random") return SamplingMode::fixed_random;
  if (name == "fixed-grid") return SamplingMode::fixed_grid;
  if (name == "pooled-grid") return SamplingMode::pooled_grid;
  throw std::invalid_argument("unknown sampling mode '" + name +
                              "' (resample | fixed-random | fixed-grid | pooled-grid)");
}

TrainConfig train_config_from(const RunConfig& c) {
  TrainConfig t;
  t.iterations = c.iterations;
  t.lr = LrSchedule{c.lr, c.lr_drop1, c.lr_drop2};
  t.n_interior = c.batch_interior;
  t.n_boundary = c.batch_boundary;
  t.seed = c.seed;
  t.deterministic = c.deterministic;
  t.sampling = parse_sampling(c.sampling);
  t.pool_size = c.pool_size;
  t.error_every = c.error_every;
  t.error_grid = c.error_grid;
  t.checkpoint_every = c.checkpoint_every;
  return t;
}

namespace {

std::vector<int> layer_sizes_for(const RunConfig& c, int input_dim) {
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  if (!c.hidden_layers.empty()) {
    for (int w : c.hidden_layers) sizes.push_back(w);
  } else {
    for (int i = 0; i < 5; ++i) sizes.push_back(128);
  }
  sizes.push_back(1);
  return sizes;
}

struct ResolvedProblem {
  ProblemSpec spec;
  ScalarField exact;  // null when unknown
  std::optional<GridProblem> grid;
  std::string name;
};

ResolvedProblem resolve_problem(const RunConfig& c) {
  if (c.problem.empty()) throw std::invalid_argument("no problem given (--problem)");
  const ProblemName parsed = parse_problem_name(c.problem);
  ResolvedProblem r;
  r.name = c.problem;
  if (parsed.kind == ProblemName::Kind::grid) {
    // grid:<bedrock>[,<thickness>[,<surface>]]
    std::vector<std::string> paths;
    std::stringstream ss(parsed.grid_paths);
    std::string item;
    while (std::getline(ss, item, ',')) paths.push_back(item);
    RunConfig gc = c;
    gc.bedrock_path = paths.size() > 0 ? paths[0] : "";
    gc.thickness_path = paths.size() > 1 ? paths[1] : "";
    gc.surface_path = paths.size() > 2 ? paths[2] : "";
    if (gc.bedrock_path.empty() || gc.thickness_path.empty())
      throw std::invalid_argument("grid problems need bedrock and thickness paths");
    const Grid bed = parse_grid_file(gc.bedrock_path);
    const Grid thk = parse_grid_file(gc.thickness_path);
    GridProblemOptions opts;
    opts.downsample_factor = c.downsample_factor;
    opts.value_scale = c.value_scale;
    opts.drift_from_bedrock_gradient = c.drift_from_bedrock;
    r.grid = build_problem(bed, thk, c.p, c.alpha, c.beta, opts);
    r.spec = r.grid->spec;
    return r;
  }
  MmsProblem mms = problem_by_name(c.problem, c.alpha, c.beta);
  r.spec = mms.spec;
  r.exact = mms.exact;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// train

TrainOutcome run_training(const RunConfig& config, const std::string& out_dir) {
  ResolvedProblem problem = resolve_problem(config);
  fs::create_directories(out_dir);

  RunConfig effective = config;
  effective.out_dir = out_dir;
  write_text_file(out_dir + "/config.json", to_json(effective));

  Network net = Network::init(config.seed, layer_sizes_for(config, problem.spec.domain.dim()));
  TrainConfig tc = train_config_from(config);
  if (tc.checkpoint_every > 0) tc.checkpoint_path = out_dir + "/net.ckpt";

  TrainOutcome outcome;
  outcome.has_exact = static_cast<bool>(problem.exact);
  outcome.report = train(net, problem.spec, tc, problem.exact);

  net.save_file(out_dir + "/net.ckpt");
  {
    std::ofstream csv(out_dir + "/train_report.csv", std::ios::trunc);
    write_train_report_csv(csv, outcome.report);
  }

  // solution dump on the standard evaluation grid
  const EvalGrid grid = EvalGrid::standard(problem.spec.domain, config.error_grid);
  const RowVector values = evaluate_chunked(net, grid.points);
  {
    std::ofstream csv(out_dir + "/solution.csv", std::ios::trunc);
    write_field_csv(csv, grid.points, values);
  }

  if (outcome.has_exact) {
    outcome.final_relative_error = outcome.report.final_relative_l1;
    json err{{"l1", outcome.report.final_l1},
             {"relative", outcome.report.final_relative_l1},
             {"grid_points", grid.size()},
             {"sample_count", config.batch_interior}};
    write_text_file(out_dir + "/error.json", err.dump(2) + "\n");
  }

  json meta{{"wall_seconds", outcome.report.wall_seconds},
            {"aborted", outcome.report.aborted},
            {"abort_reason", outcome.report.abort_reason},
            {"seed", outcome.report.seed}};
  write_text_file(out_dir + "/run_meta.json", meta.dump(2) + "\n");
  return outcome;
}

int cmd_train(const RunConfig& config) {
  const TrainOutcome outcome = run_training(config, config.out_dir);
  if (outcome.report.aborted) {
    std::cerr << "error: training aborted: " << outcome.report.abort_reason << "\n";
    return kExitDomainError;
  }
  const LossBreakdown& last = outcome.report.losses.back();
  std::cout << "train " << config.problem << ": " << outcome.report.iterations()
            << " iterations, total loss " << last.total;
  if (outcome.has_exact) std::cout << ", relative L1 error " << outcome.final_relative_error;
  std::cout << "\n  artifacts in " << config.out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(const RunConfig& config) {
  if (config.pairs.empty())
    throw std::invalid_argument("sweep needs at least one alpha:beta pair (--pairs)");
  fs::create_directories(config.out_dir);
  write_text_file(config.out_dir + "/config.json", to_json(config));

  struct Cell {
    double alpha, beta;
    double error = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
  };
  std::vector<Cell> cells(config.pairs.size());

  auto run_cell = [&](std::size_t i) {
    Cell& cell = cells[i];
    cell.alpha = config.pairs[i].first;
    cell.beta = config.pairs[i].second;
    RunConfig rc = config;
    rc.alpha = cell.alpha;
    rc.beta = cell.beta;
    rc.seed = config.seed + i;  // duplicate pairs get distinct seeds
    rc.error_every = 0;
    std::ostringstream dir;
    dir << config.out_dir << "/pair" << i << "_a" << cell.alpha << "_b" << cell.beta;
    try {
      const TrainOutcome outcome = run_training(rc, dir.str());
      if (outcome.report.aborted || !outcome.has_exact ||
          !std::isfinite(outcome.final_relative_error))
        cell.failed = true;
      else
        cell.error = outcome.final_relative_error;
    } catch (const std::exception& e) {
      std::cerr << "sweep cell " << i << " failed: " << e.what() << "\n";
      cell.failed = true;
    }
  };

  int workers = config.deterministic ? 1 : config.workers;
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
          run_cell(i);
      });
    for (auto& t : pool) t.join();
  }

  std::ofstream csv(config.out_dir + "/sweep.csv", std::ios::trunc);
  csv << "alpha,beta,relative_error\n";
  char buf[64];
  for (const Cell& cell : cells) {
    csv << cell.alpha << ',' << cell.beta << ',';
    if (cell.failed) {
      csv << "failed";
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g", cell.error);
      csv << buf;
    }
    csv << '\n';
  }
  std::cout << "sweep complete: " << cells.size() << " cells, results in " << config.out_dir
            << "/sweep.csv\n";
  bool any_failed = false;
  for (const Cell& cell : cells) any_failed = any_failed || cell.failed;
  return any_failed ? kExitDomainError : kExitOk;
}

// ---------------------------------------------------------------------------
// oracle

int cmd_oracle(const RunConfig& config) {
  const ProblemName parsed = parse_problem_name(
      config.problem.empty() ? throw std::invalid_argument("no problem given (--problem)")
                             : config.problem);
  if (parsed.kind == ProblemName::Kind::grid)
    throw std::invalid_argument("the finite-difference oracle runs on the manufactured problems");
  fs::create_directories(config.out_dir);
  write_text_file(config.out_dir + "/config.json", to_json(config));

  const MmsProblem problem = problem_by_name(config.problem, config.alpha, config.beta);
  Matrix points;
  RowVector values;
  long iterations = 0;

  if (parsed.kind == ProblemName::Kind::mms1d) {
    const PsorResult res = solve_psor_1d(problem.spec, config.cells);
    points.resize(1, res.x.size());
    points.row(0) = res.x.transpose();
    values = res.u.transpose();
    iterations = res.sweeps;
  } else {
    const PgdResult res = solve_pgd_2d(problem.spec, config.cells, config.cells);
    const int sx = static_cast<int>(res.x.size());
    const int sy = static_cast<int>(res.y.size());
    points.resize(2, static_cast<long>(sx) * sy);
    for (int j = 0; j < sy; ++j)
      for (int i = 0; i < sx; ++i) {
        points(0, static_cast<long>(j) * sx + i) = res.x(i);
        points(1, static_cast<long>(j) * sx + i) = res.y(j);
      }
    values = res.u.transpose();
    iterations = res.iterations;
  }

  {
    std::ofstream csv(config.out_dir + "/oracle_solution.csv", std::ios::trunc);
    write_field_csv(csv, points, values);
  }

  RowVector exact(points.cols());
  for (int i = 0; i < points.cols(); ++i) exact(i) = problem.exact(points.col(i));
  const double max_err = (values - exact).cwiseAbs().maxCoeff();
  const ErrorReport rep = l1_error(values, exact);
  json err{{"max_error", max_err},
           {"l1", rep.l1},
           {"relative", rep.relative},
           {"cells", config.cells},
           {"iterations", iterations}};
  write_text_file(config.out_dir + "/error.json", err.dump(2) + "\n");
  std::cout << "oracle " << config.problem << ": cells " << config.cells << ", max error "
            << max_err << ", relative L1 " << rep.relative << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// greenland

namespace {

Grid predicted_grid(const Network& net, const GridProblem& gp, double value_scale,
                    bool thickness) {
  const Grid& bed = gp.bed_grid;
  Grid out = bed;
  for (int r = 0; r < bed.nrows; ++r)
    for (int c = 0; c < bed.ncols; ++c) {
      const double easting = bed.xll + (c + 0.5) * bed.cellsize;
      const double northing = bed.yll + (bed.nrows - r - 0.5) * bed.cellsize;
      const Vector unit = gp.bedrock.to_unit(easting, northing);
      const double u = net.eval(unit).value;
      const std::size_t idx = static_cast<std::size_t>(r) * bed.ncols + c;
      if (thickness)
        out.values[idx] = (u - gp.bedrock.eval(unit)) / value_scale;
      else
        out.values[idx] = u / value_scale;
    }
  return out;
}

}  // namespace

int cmd_greenland(const RunConfig& config) {
  if (config.bedrock_path.empty() || config.thickness_path.empty())
    throw std::invalid_argument("greenland runs need --bedrock and --thickness grid paths");
  fs::create_directories(config.out_dir);
  write_text_file(config.out_dir + "/config.json", to_json(config));

  const Grid bed_raw = parse_grid_file(config.bedrock_path);
  const Grid thk_raw = parse_grid_file(config.thickness_path);
  check_range(bed_raw, kBedrockRange, "bedrock");
  check_range(thk_raw, kThicknessRange, "thickness");

  GridProblemOptions opts;
  opts.downsample_factor = config.downsample_factor;
  opts.value_scale = config.value_scale;
  opts.drift_from_bedrock_gradient = config.drift_from_bedrock;
  GridProblem gp = build_problem(bed_raw, thk_raw, config.p, config.alpha, config.beta, opts);

  // stage 1: fit the network to the bedrock as initialization
  std::vector<int> sizes;
  sizes.push_back(2);
  if (!config.hidden_layers.empty())
    for (int w : config.hidden_layers) sizes.push_back(w);
  else
    for (int i = 0; i < 15; ++i) sizes.push_back(320);
  sizes.push_back(1);

  Network net = Network::init(config.seed, sizes);
  TrainConfig pre_cfg = train_config_from(config);
  pre_cfg.iterations = config.pretrain_iterations;
  const NormalizedField& bed_field = gp.bedrock;
  const PretrainReport pre =
      pretrain(net, gp.spec.domain, [&](const Vector& x) { return bed_field.eval(x); }, pre_cfg);
  if (pre.aborted) {
    std::cerr << "error: pretraining aborted: " << pre.abort_reason << "\n";
    return kExitDomainError;
  }
  net.save_file(config.out_dir + "/pretrained.ckpt");
  {
    std::ofstream csv(config.out_dir + "/pretrain_report.csv", std::ios::trunc);
    csv << "iteration,mse\n";
    char buf[64];
    for (std::size_t i = 0; i < pre.mse.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", pre.mse[i]);
      csv << i << ',' << buf << '\n';
    }
  }

  // benchmark constants: the data field inserted into the loss terms
  NormalizedField benchmark_field = gp.surface;
  std::string benchmark_source = "bedrock+thickness";
  if (!config.surface_path.empty()) {
    const Grid surf_raw = parse_grid_file(config.surface_path);
    check_range(surf_raw, kSurfaceRange, "surface");
    Grid surf = downsample(surf_raw, config.downsample_factor);
    benchmark_field = NormalizedField(surf, config.value_scale);
    benchmark_source = config.surface_path;
  }
  const SampleBatch benchmark_batch =
      sample_batch(gp.spec.domain, config.batch_interior, config.batch_boundary, config.seed,
                   0xB19CULL, gp.spec.interior_mask);
  const LossBreakdown bench = data_benchmark_losses(gp.spec, benchmark_field, benchmark_batch);
  {
    json j{{"source", benchmark_source},
           {"losses", breakdown_json(bench)},
           {"batch_seed", benchmark_batch.seed}};
    write_text_file(config.out_dir + "/benchmarks.json", j.dump(2) + "\n");
  }

  // stage 2: energy training from the pretrained weights
  TrainConfig tc = train_config_from(config);
  if (tc.checkpoint_every > 0) tc.checkpoint_path = config.out_dir + "/net.ckpt";
  const TrainReport report = train(net, gp.spec, tc);
  net.save_file(config.out_dir + "/net.ckpt");
  {
    std::ofstream csv(config.out_dir + "/train_report.csv", std::ios::trunc);
    write_train_report_csv(csv, report);
  }
  if (report.aborted) {
    std::cerr << "error: training aborted: " << report.abort_reason << "\n";
    return kExitDomainError;
  }

  write_grid_file(config.out_dir + "/solution_surface.asc",
                  predicted_grid(net, gp, config.value_scale, /*thickness=*/false));
  write_grid_file(config.out_dir + "/solution_thickness.asc",
                  predicted_grid(net, gp, config.value_scale, /*thickness=*/true));

  // final losses on the benchmark batch, next to the data constants
  const LossBreakdown final_losses = total_loss(net, gp.spec, benchmark_batch);
  {
    json j{{"final", breakdown_json(final_losses)},
           {"benchmark", breakdown_json(bench)},
           {"pretrain_final_mse", pre.mse.empty() ? 0.0 : pre.mse.back()},
           {"wall_seconds", report.wall_seconds + pre.wall_seconds}};
    write_text_file(config.out_dir + "/summary.json", j.dump(2) + "\n");
  }

  std::cout << "greenland p=" << config.p << " (" << gp.description << ")\n"
            << "  pretrain final mse " << (pre.mse.empty() ? 0.0 : pre.mse.back()) << "\n"
            << "  final loss2 " << final_losses.loss2 << " (benchmark " << bench.loss2 << ")\n"
            << "  final loss3 " << final_losses.loss3 << " (benchmark " << bench.loss3 << ")\n"
            << "  artifacts in " << config.out_dir << "\n";
  return kExitOk;
}

}  // namespace iceritz::cli
