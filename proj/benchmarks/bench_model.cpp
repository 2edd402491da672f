#include <benchmark/benchmark.h>

#include "drivedit/rfdit/train.hpp"

using namespace drivedit::rfdit;

namespace {

const TrainingData& data() {
  static const TrainingData d(make_toy_fixture(), TrainConfig{});
  return d;
}

void BM_Forward(benchmark::State& state) {
  const TrainConfig cfg;
  const ToyModel model(cfg.model, 1);
  const auto& draw = data().pool.front();
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(draw.x0, draw.t, &data().conds, false));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_TrainingStepGradient(benchmark::State& state) {
  const TrainConfig cfg;
  const ToyModel model(cfg.model, 1);
  std::vector<Matrix> grads;
  for (const auto& p : model.parameters()) grads.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(model, data(), cfg.weights, workers, &grads));
}
BENCHMARK(BM_TrainingStepGradient)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
