#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "unicat/metrics.hpp"
#include "unicat/numerics.hpp"
#include "unicat/objectives.hpp"
#include "unicat/pipeline.hpp"
#include "unicat/rng.hpp"

using namespace unicat;

namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = rng_normal(rng, n, n), b = rng_normal(rng, n, n);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_TripletLoss(benchmark::State& state) {
  const auto P = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t K = 4;
  Rng rng(2);
  const Matrix z = rng_normal(rng, P * K, 32);
  std::vector<ClassIndex> labels;
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t k = 0; k < K; ++k) labels.push_back(p);
  for (auto _ : state) benchmark::DoNotOptimize(triplet_loss(z, labels, 0.0));
}
BENCHMARK(BM_TripletLoss)->Arg(8)->Arg(16)->Arg(32);

void BM_CmcMap(benchmark::State& state) {
  const auto nq = static_cast<std::size_t>(state.range(0));
  const std::size_t ng = 5 * nq;
  Rng rng(3);
  const Matrix q = rng_normal(rng, nq, 32), g = rng_normal(rng, ng, 32);
  const Matrix d = cosine_distance(q, g);
  std::vector<Label> qid(nq), gid(ng);
  std::vector<std::uint32_t> qv(nq, 0), gv(ng, 1);
  for (std::size_t i = 0; i < nq; ++i) qid[i] = i % 100;
  for (std::size_t i = 0; i < ng; ++i) gid[i] = i % 100;
  for (auto _ : state) benchmark::DoNotOptimize(cmc_map(d, qid, gid, qv, gv, {}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(nq * ng));
}
BENCHMARK(BM_CmcMap)->Arg(200)->Arg(400);

// One epoch of the default architecture on the clean preset (three streams).
void BM_TrainEpoch(benchmark::State& state) {
  const auto strategy = static_cast<Strategy>(state.range(0));
  const MultimodalDataset ds = make_dataset(clean_preset(1));
  TrainConfig cfg;
  cfg.strategy = strategy;
  cfg.epochs = 1;
  cfg.warmup_epochs = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train(ds, cfg));
  state.SetLabel(std::string(to_string(strategy)));
}
BENCHMARK(BM_TrainEpoch)
    ->Arg(static_cast<int>(Strategy::UniCat))
    ->Arg(static_cast<int>(Strategy::FusionAvg))
    ->Arg(static_cast<int>(Strategy::FusionConcat))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
