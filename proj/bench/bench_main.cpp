// Serial reference kernels against their OpenMP counterparts.
//   ./mce_bench --benchmark_filter=Train

#include <benchmark/benchmark.h>
#include <omp.h>

#include "mce/eval.hpp"
#include "mce/random.hpp"
#include "mce/synthgen.hpp"
#include "mce/trainer.hpp"

using namespace mce;

namespace {

const Corpus& bench_corpus() {
  static const Corpus corpus = [] {
    SynthConfig sc;
    sc.n_entities = 1000;
    sc.episodes_per_entity = 10;
    return make_corpus(build_vocab(generate(sc).records, 5), 7);
  }();
  return corpus;
}

Matrix random_points(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (auto& x : m.data) x = uniform01(rng) * 2 - 1;
  return m;
}

// Arg 0: serial loop; otherwise hogwild with every available thread.
void BM_Train(benchmark::State& state) {
  TrainConfig cfg;
  cfg.dim = 100;
  cfg.gamma = 60;
  cfg.epochs = 1;
  cfg.sample_threshold = 1;
  cfg.workers = state.range(0) == 0 ? 1 : omp_get_max_threads();
  std::uint64_t steps = 0;
  for (auto _ : state) {
    auto result = train<float>(bench_corpus(), cfg);
    steps += result.report.targets;
    benchmark::DoNotOptimize(result.params.input.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(steps));
  state.counters["workers"] = cfg.workers;
}
BENCHMARK(BM_Train)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Assign(benchmark::State& state) {
  const Exec exec = state.range(0) == 0 ? Exec::serial : Exec::parallel;
  Matrix points = random_points(20000, 100, 1);
  Matrix centroids = random_points(10, 100, 2);
  std::vector<int> assignment;
  std::vector<double> distance;
  for (auto _ : state) {
    benchmark::DoNotOptimize(assign_points(points, centroids, assignment, distance, exec));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(points.rows));
}
BENCHMARK(BM_Assign)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_NearestNeighbour(benchmark::State& state) {
  const Exec exec = state.range(0) == 0 ? Exec::serial : Exec::parallel;
  Matrix points = random_points(3000, 100, 3);
  std::vector<std::size_t> rows(points.rows);
  std::vector<int> labels(points.rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = i;
    labels[i] = static_cast<int>(i % 50);
  }
  for (auto _ : state) benchmark::DoNotOptimize(nns_p_at_1(points, rows, labels, exec).hits);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows.size()));
}
BENCHMARK(BM_NearestNeighbour)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
