#include "iceritz/oracle.hpp"
#include "iceritz/problems.hpp"

#include <benchmark/benchmark.h>

using namespace iceritz;

namespace {

void BM_psor_1d(benchmark::State& state) {
  const MmsProblem prob = make_mms_1d(1.0, 1.0);
  const int cells = static_cast<int>(state.range(0));
  for (auto _ : state) {
    PsorResult res = solve_psor_1d(prob.spec, cells);
    benchmark::DoNotOptimize(res.u);
  }
}

void BM_pgd_2d(benchmark::State& state) {
  const MmsProblem prob = make_mms_2d(3.0, 1.0, 1.0);
  const int cells = static_cast<int>(state.range(0));
  for (auto _ : state) {
    PgdResult res = solve_pgd_2d(prob.spec, cells, cells);
    benchmark::DoNotOptimize(res.u);
  }
}

}  // namespace

BENCHMARK(BM_psor_1d)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_pgd_2d)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
