#include "iceritz/optim.hpp"

#include "iceritz/metrics.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace iceritz {

AdamState AdamState::for_network(const Network& net) {
  AdamState st;
  st.first_moment = net.zero_gradient();
  st.second_moment = net.zero_gradient();
  return st;
}

double lr_at(long iteration, const LrSchedule& schedule) {
  if (iteration < 0) throw std::invalid_argument("iteration must be nonnegative");
  if (iteration < schedule.drop1) return schedule.base;
  if (iteration < schedule.drop2) return schedule.base / 2.0;
  return schedule.base / 4.0;
}

void adam_step(Network& net, const ParamGradient& grad, AdamState& state, double lr,
               const AdamParams& params) {
  if (grad.blocks.size() != net.layers().size())
    throw std::invalid_argument("gradient shape mismatch");
  if (!grad.all_finite())
    throw std::runtime_error("non-finite gradient passed to the optimizer");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(params.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(params.beta2, static_cast<double>(state.step));

  auto update = [&](Eigen::Ref<Matrix> theta, Eigen::Ref<Matrix> m, Eigen::Ref<Matrix> v,
                    const Matrix& g) {
    m = params.beta1 * m + (1.0 - params.beta1) * g;
    v = params.beta2 * v.array().matrix() + (1.0 - params.beta2) * g.cwiseProduct(g);
    theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + params.eps);
  };

  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    Layer& layer = net.layers()[l];
    AdamState& st = state;
    update(layer.weight, st.first_moment.blocks[l].weight, st.second_moment.blocks[l].weight,
           grad.blocks[l].weight);
    update(layer.bias, st.first_moment.blocks[l].bias, st.second_moment.blocks[l].bias,
           grad.blocks[l].bias);
    if (layer.normed) {
      update(layer.gain, st.first_moment.blocks[l].gain, st.second_moment.blocks[l].gain,
             grad.blocks[l].gain);
      update(layer.shift, st.first_moment.blocks[l].shift, st.second_moment.blocks[l].shift,
             grad.blocks[l].shift);
    }
  }
}

namespace {

double l1_on_grid(const Network& net, const ScalarField& exact, const EvalGrid& grid) {
  return l1_error(net, exact, grid).relative;
}

}  // namespace

TrainReport train(Network& net, const ProblemSpec& spec, const TrainConfig& config,
                  const ScalarField& exact) {
  spec.validate();
  if (config.iterations < 0) throw std::invalid_argument("iterations must be nonnegative");

  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = config.seed;
  report.losses.reserve(config.iterations);
  report.lr.reserve(config.iterations);
  const bool track_error = static_cast<bool>(exact) && config.error_every > 0;
  if (track_error)
    report.l1_error.assign(config.iterations, std::numeric_limits<double>::quiet_NaN());

  EvalGrid grid;
  if (static_cast<bool>(exact))
    grid = EvalGrid::standard(spec.domain, config.error_grid);

  SampleBatch fixed;
  SampleBatch pool;
  if (config.sampling == SamplingMode::fixed_random)
    fixed = sample_batch(spec.domain, config.n_interior, config.n_boundary, config.seed, 0,
                         spec.interior_mask);
  else if (config.sampling == SamplingMode::fixed_grid)
    fixed = grid_batch(spec.domain, config.n_interior, config.n_boundary);
  else if (config.sampling == SamplingMode::pooled_grid) {
    const int pool_size =
        config.pool_size > 0 ? config.pool_size : 16 * config.n_interior;
    pool = grid_batch(spec.domain, pool_size, config.n_boundary);
    fixed.boundary = pool.boundary;
    fixed.interior.resize(spec.domain.dim(), config.n_interior);
  }

  AdamState state = AdamState::for_network(net);
  ParamGradient grad = net.zero_gradient();

  for (long it = 0; it < config.iterations; ++it) {
    if (config.sampling == SamplingMode::resample) {
      fixed = sample_batch(spec.domain, config.n_interior, config.n_boundary, config.seed,
                           static_cast<std::uint64_t>(it), spec.interior_mask);
    } else if (config.sampling == SamplingMode::pooled_grid) {
      // random subset of the collocation pool, one stream per iteration
      Rng rng(Rng::derive(config.seed, static_cast<std::uint64_t>(it)));
      const auto n_pool = static_cast<std::uint64_t>(pool.interior.cols());
      for (int i = 0; i < config.n_interior; ++i)
        fixed.interior.col(i) = pool.interior.col(static_cast<long>(rng.raw() % n_pool));
      fixed.seed = Rng::derive(config.seed, static_cast<std::uint64_t>(it));
    }
    const SampleBatch& batch = fixed;

    grad.set_zero();
    LossBreakdown lb;
    try {
      lb = loss_and_gradient(net, spec, batch, grad);
    } catch (const std::exception& e) {
      report.aborted = true;
      report.abort_reason = e.what();
      break;
    }
    report.losses.push_back(lb);
    const double lr = lr_at(it, config.lr);
    report.lr.push_back(lr);
    if (!std::isfinite(lb.total)) {
      report.aborted = true;
      report.abort_reason = "non-finite loss at iteration " + std::to_string(it);
      break;
    }
    try {
      adam_step(net, grad, state, lr, config.adam);
    } catch (const std::exception& e) {
      report.aborted = true;
      report.abort_reason = e.what();
      break;
    }

    if (track_error && (it % config.error_every == 0 || it + 1 == config.iterations))
      report.l1_error[it] = l1_on_grid(net, exact, grid);

    if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
        (it + 1) % config.checkpoint_every == 0)
      net.save_file(config.checkpoint_path);
  }

  if (static_cast<bool>(exact)) {
    const ErrorReport err = l1_error(net, exact, grid);
    report.final_l1 = err.l1;
    report.final_relative_l1 = err.relative;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

PretrainReport pretrain(Network& net, const Domain& domain, const ScalarField& target,
                        const TrainConfig& config) {
  domain.validate();
  if (!target) throw std::invalid_argument("pretraining target missing");

  const auto t0 = std::chrono::steady_clock::now();
  PretrainReport report;
  report.seed = config.seed;
  report.mse.reserve(config.iterations);

  AdamState state = AdamState::for_network(net);
  ParamGradient grad = net.zero_gradient();

  for (long it = 0; it < config.iterations; ++it) {
    const SampleBatch batch = sample_batch(domain, config.n_interior, 0, config.seed,
                                           static_cast<std::uint64_t>(it));
    const int n = static_cast<int>(batch.interior.cols());

    BatchForward fwd = net.forward(batch.interior, /*with_input_tangents=*/false);
    const RowVector& u = fwd.values();
    RowVector residual(n);
    for (int i = 0; i < n; ++i) residual(i) = u(i) - target(batch.interior.col(i));
    const double mse = residual.squaredNorm() / n;
    report.mse.push_back(mse);
    if (!std::isfinite(mse)) {
      report.aborted = true;
      report.abort_reason = "non-finite pretraining loss at iteration " + std::to_string(it);
      break;
    }

    grad.set_zero();
    RowVector vseed = (2.0 / n) * residual;
    fwd.backward(vseed, Matrix(), grad);
    try {
      adam_step(net, grad, state, lr_at(it, config.lr), config.adam);
    } catch (const std::exception& e) {
      report.aborted = true;
      report.abort_reason = e.what();
      break;
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_train_report_csv(std::ostream& out, const TrainReport& report) {
  out << "iteration,loss1,loss2,loss3,total,l1_error,lr\n";
  char buf[64];
  for (long it = 0; it < report.iterations(); ++it) {
    const LossBreakdown& lb = report.losses[it];
    out << it;
    for (double v : {lb.loss1, lb.loss2, lb.loss3, lb.total}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << ',';
    if (it < static_cast<long>(report.l1_error.size()) && std::isfinite(report.l1_error[it])) {
      std::snprintf(buf, sizeof(buf), "%.17g", report.l1_error[it]);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", report.lr[it]);
    out << ',' << buf << '\n';
  }
}

}  // namespace iceritz
