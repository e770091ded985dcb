// Loss value+gradient: one-tape-per-item OpenMP kernel vs the single-tape serial reference.

#include <benchmark/benchmark.h>

#include <random>

#include "vcnf/loss.hpp"
#include "vcnf/verify.hpp"

using namespace vcnf;

namespace {

ProblemSpec problem(int family) {
  const auto p0 = Gaussian::isotropic(2, 1.0, -1.0);
  switch (family) {
    case 0:
      return OTProblem{p0, Gaussian::isotropic(2, 1.0, 1.0)};
    case 1:
      return RWPOProblem{p0, QuadraticPotential{}, 1.0, 1.0};
    default:
      return FPMatchProblem{Gaussian::isotropic(2, 4.0), OUDrift{1.0}, 0.5, 1.0, std::nullopt};
  }
}

TrainConfig batch_config(int threads) {
  TrainConfig c;
  c.n_t = 8;
  c.n_k = 16;
  c.n_b = 256;
  c.n_1 = 64;
  c.penalty_chunk = 32;
  c.lambda = 100.0;
  c.threads = threads;
  return c;
}

template <bool Parallel>
void BM_LossGrad(benchmark::State& state) {
  const auto spec = problem(static_cast<int>(state.range(0)));
  const auto cfg = batch_config(static_cast<int>(state.range(1)));
  Architecture arch;
  arch.dim = 2;
  const FlowModel m = random_model(arch, 7);
  std::mt19937_64 rng(11);
  const auto batch = draw_batch(spec, cfg, rng);
  for (auto _ : state) {
    auto g = Parallel ? loss_grad_parallel(m, spec, cfg, batch) : loss_grad_serial(m, spec, cfg, batch);
    benchmark::DoNotOptimize(g.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * (cfg.n_t * cfg.n_k + cfg.n_b));
}

void BM_LossValue(benchmark::State& state) {
  const auto spec = problem(static_cast<int>(state.range(0)));
  const auto cfg = batch_config(static_cast<int>(state.range(1)));
  Architecture arch;
  arch.dim = 2;
  const FlowModel m = random_model(arch, 7);
  std::mt19937_64 rng(11);
  const auto batch = draw_batch(spec, cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(loss_value(m, spec, cfg, batch).total());
}

// args: family (0 ot, 1 rwpo, 2 fp), threads (0 = OpenMP default)
BENCHMARK(BM_LossGrad<true>)->Name("loss_grad_parallel")->ArgsProduct({{0, 1, 2}, {1, 0}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGrad<false>)->Name("loss_grad_serial")->ArgsProduct({{0, 1, 2}, {1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossValue)->Name("loss_value")->ArgsProduct({{0, 1, 2}, {1, 0}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
