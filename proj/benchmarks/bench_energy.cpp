#include "iceritz/energy.hpp"
#include "iceritz/problems.hpp"

#include <benchmark/benchmark.h>

using namespace iceritz;

namespace {

void BM_total_loss(benchmark::State& state) {
  const MmsProblem prob = make_mms_1d(4000.0, 4000.0);
  const Network net = Network::init(1, {1, 128, 128, 128, 128, 128, 1});
  const SampleBatch batch =
      sample_batch(prob.spec.domain, static_cast<int>(state.range(0)), 256, 1);
  for (auto _ : state) {
    LossBreakdown lb = total_loss(net, prob.spec, batch);
    benchmark::DoNotOptimize(lb);
  }
}

void BM_loss_and_gradient(benchmark::State& state) {
  const MmsProblem prob = make_mms_1d(4000.0, 4000.0);
  const Network net = Network::init(1, {1, 128, 128, 128, 128, 128, 1});
  const SampleBatch batch =
      sample_batch(prob.spec.domain, static_cast<int>(state.range(0)), 256, 1);
  ParamGradient grad = net.zero_gradient();
  for (auto _ : state) {
    grad.set_zero();
    LossBreakdown lb = loss_and_gradient(net, prob.spec, batch, grad);
    benchmark::DoNotOptimize(lb);
  }
}

void BM_sample_batch(benchmark::State& state) {
  const Domain domain = Domain::unit_square();
  std::uint64_t counter = 0;
  for (auto _ : state) {
    SampleBatch batch = sample_batch(domain, static_cast<int>(state.range(0)), 256, 1, counter++);
    benchmark::DoNotOptimize(batch);
  }
}

}  // namespace

BENCHMARK(BM_total_loss)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_loss_and_gradient)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sample_batch)->Arg(1024)->Arg(16384)->Unit(benchmark::kMicrosecond);
