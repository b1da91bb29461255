#include <benchmark/benchmark.h>

#include "rdmd/analytic.hpp"
#include "rdmd/data.hpp"
#include "rdmd/diffusion.hpp"
#include "rdmd/networks.hpp"
#include "rdmd/trainer.hpp"

using namespace rdmd;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_matrix(1024, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_values(a, b));
  state.SetItemsProcessed(state.iterations() * 1024 * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_DenoiserForward(benchmark::State& state) {
  Rng rng(2);
  const DenoiserNet net(NetConfig{}, NoiseSchedule{}, rng);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = sample_source_gaussian(n, rng);
  const std::vector<double> sigmas(n, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(net.denoise(x, sigmas));
}
BENCHMARK(BM_DenoiserForward)->Arg(256)->Arg(1024);

void BM_DsmStep(benchmark::State& state) {
  Rng rng(3);
  const DenoiserNet net(NetConfig{}, NoiseSchedule{}, rng);
  const Tensor x0 = sample_8gaussians(1024, rng);
  const Tensor eps = sample_source_gaussian(1024, rng);
  std::vector<double> sigmas(1024);
  for (double& s : sigmas) s = std::exp(std::log(0.01) + rng.uniform() * std::log(8000.0));
  for (auto _ : state) {
    Graph g;
    auto bound = net.params().bind(g, true);
    Gradients gr = g.backward(dsm_loss(g, net, bound, x0, sigmas, eps, LossWeight::inverse_sigma2));
    benchmark::DoNotOptimize(gr.size());
  }
}
BENCHMARK(BM_DsmStep)->Unit(benchmark::kMillisecond);

void BM_MixtureScores(benchmark::State& state) {
  Rng rng(4);
  const GaussianMixture law = eight_gaussians_mixture(EightGaussians{});
  const Tensor y = sample_8gaussians(1024, rng);
  const std::vector<double> sigmas(1024, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(mixture_scores(law, y, sigmas));
}
BENCHMARK(BM_MixtureScores);

void BM_EnergyDistance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const Tensor a = sample_8gaussians(n, rng), b = sample_8gaussians(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(energy_distance(a, b));
}
BENCHMARK(BM_EnergyDistance)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_CrossingCount(benchmark::State& state) {
  Rng rng(6);
  const Tensor x = sample_source_gaussian(5000, rng);
  const PairSet pairs(x, sample_8gaussians(5000, rng));
  for (auto _ : state) {
    Rng r(7);
    benchmark::DoNotOptimize(crossing_count(pairs, 1000, r));
  }
}
BENCHMARK(BM_CrossingCount)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
