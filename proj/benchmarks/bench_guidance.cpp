#include <random>

#include <benchmark/benchmark.h>

#include "drivedit/fixtures.hpp"
#include "drivedit/guidance.hpp"

using namespace drivedit;

namespace {

void BM_Canny(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ImageU8 g(n, n, 1);
  std::mt19937_64 rng(1);
  for (auto& v : g.data()) v = static_cast<std::uint8_t>(rng() & 0xff);
  for (auto _ : state) benchmark::DoNotOptimize(canny_edges(g, 50, 150));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Canny)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_BuildGuidance(benchmark::State& state) {
  fixtures::SceneOptions opt;
  opt.width = 320;
  opt.height = 180;
  const SceneBundle scene = fixtures::make_demo_scene(opt);
  std::vector<std::vector<ObjectRender>> renders(scene.cameras.size());
  for (std::size_t c = 0; c < scene.cameras.size(); ++c)
    renders[c].assign(scene.frame_count(), ObjectRender::empty(opt.width, opt.height));
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_guidance(scene, renders, GuidanceParams{}, workers));
}
BENCHMARK(BM_BuildGuidance)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
