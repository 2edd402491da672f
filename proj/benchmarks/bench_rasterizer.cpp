#include <benchmark/benchmark.h>

#include "drivedit/fixtures.hpp"
#include "drivedit/rasterizer.hpp"

using namespace drivedit;

namespace {

Camera road_camera(int width, int height) {
  Camera cam;
  cam.name = "CAM";
  cam.width = width;
  cam.height = height;
  const double f = 0.7 * width;
  cam.intrinsics << f, 0, width / 2.0, 0, f, height / 2.0, 0, 0, 1;
  Mat4 c2w = Mat4::Identity();
  c2w.topLeftCorner<3, 3>() << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  c2w(2, 3) = 1.5;
  cam.extrinsics = {c2w};
  return cam;
}

void BM_RenderToyCar(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const int workers = static_cast<int>(state.range(1));
  const Camera cam = road_camera(width, width * 9 / 16);
  const Mesh car = fixtures::make_toy_car_mesh();
  BBox3D box;
  box.center = Vec3(8.0, 0.5, 0.8);
  box.size = Vec3(1.9, 4.4, 1.6);
  box.yaw = 0.4;
  const AssetTransform t = fit_mesh_to_box(car, box);
  for (auto _ : state) benchmark::DoNotOptimize(render_asset(car, t, cam, 0, {}, workers));
  state.SetItemsProcessed(state.iterations() * cam.width * cam.height);
}
BENCHMARK(BM_RenderToyCar)->Args({320, 1})->Args({1600, 1})->Args({1600, 4})->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
