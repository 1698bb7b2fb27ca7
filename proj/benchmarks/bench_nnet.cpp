#include "iceritz/energy.hpp"
#include "iceritz/nnet.hpp"

#include <benchmark/benchmark.h>

using namespace iceritz;

namespace {

Matrix random_points(int dim, int n) {
  Rng rng(1);
  Matrix x(dim, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < dim; ++k) x(k, i) = rng.uniform();
  return x;
}

void BM_forward_values(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const int depth = static_cast<int>(state.range(1));
  const int batch = static_cast<int>(state.range(2));
  std::vector<int> sizes{2};
  for (int i = 0; i < depth; ++i) sizes.push_back(width);
  sizes.push_back(1);
  const Network net = Network::init(1, sizes);
  const Matrix x = random_points(2, batch);
  for (auto _ : state) {
    RowVector v = net.evaluate(x);
    benchmark::DoNotOptimize(v);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void BM_forward_with_gradients(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const int depth = static_cast<int>(state.range(1));
  const int batch = static_cast<int>(state.range(2));
  std::vector<int> sizes{2};
  for (int i = 0; i < depth; ++i) sizes.push_back(width);
  sizes.push_back(1);
  const Network net = Network::init(1, sizes);
  const Matrix x = random_points(2, batch);
  for (auto _ : state) {
    BatchForward fwd = net.forward(x);
    benchmark::DoNotOptimize(fwd.values());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void BM_backward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const int depth = static_cast<int>(state.range(1));
  const int batch = static_cast<int>(state.range(2));
  std::vector<int> sizes{2};
  for (int i = 0; i < depth; ++i) sizes.push_back(width);
  sizes.push_back(1);
  const Network net = Network::init(1, sizes);
  const Matrix x = random_points(2, batch);
  const BatchForward fwd = net.forward(x);
  ParamGradient grad = net.zero_gradient();
  const RowVector vseed = RowVector::Ones(batch);
  const Matrix gseed = Matrix::Ones(2, batch);
  for (auto _ : state) {
    grad.set_zero();
    fwd.backward(vseed, gseed, grad);
    benchmark::DoNotOptimize(grad);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

}  // namespace

BENCHMARK(BM_forward_values)->Args({128, 5, 1024})->Args({320, 15, 256})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward_with_gradients)
    ->Args({128, 5, 1024})
    ->Args({320, 15, 256})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_backward)->Args({128, 5, 1024})->Args({320, 15, 256})->Unit(benchmark::kMillisecond);
