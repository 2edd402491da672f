#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "drivedit/fixtures.hpp"
#include "drivedit/placement.hpp"
#include "oracles/rect_overlap.hpp"
#include "support/helpers.hpp"

using namespace drivedit;
namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

namespace {

BBox3D rect(double x, double y, double w, double l, double yaw, std::string id = "b") {
  BBox3D b;
  b.center = Vec3(x, y, 0.8);
  b.size = Vec3(w, l, 1.6);
  b.yaw = yaw;
  b.id = std::move(id);
  return b;
}

SceneBundle one_frame_scene(std::vector<BBox3D> boxes) {
  SceneBundle s;
  s.meta.num_frames = 1;
  s.boxes = {std::move(boxes)};
  return s;
}

Trajectory single(const BBox3D& b) {
  Trajectory t;
  t.boxes = {b};
  t.id = "inserted_0";
  return t;
}

SceneBundle empty_scene(fixtures::Rig rig, int width = 64, int height = 48) {
  fixtures::SceneOptions o;
  o.rig = rig;
  o.with_parked_car = false;
  o.width = width;
  o.height = height;
  return fixtures::make_demo_scene(o);
}

bool same_box(const BBox3D& a, const BBox3D& b) {
  return a.center == b.center && a.size == b.size && a.yaw == b.yaw && a.category == b.category && a.id == b.id;
}

const fs::path kDataDir = DRIVEDIT_TEST_DATA_DIR;

}  // namespace

TEST(ClassifyView, Examples) {
  EXPECT_EQ(classify_view(Vec3(10, 0, 0)), ViewBin::front);
  EXPECT_EQ(classify_view(Vec3(0, 10, 0)), ViewBin::left);
  EXPECT_EQ(classify_view(Vec3(0, -10, 0)), ViewBin::right);
  EXPECT_EQ(classify_view(Vec3(-10, 0.1, 0)), ViewBin::back);
  EXPECT_EQ(classify_view(Vec3(-7, -7, 0)), ViewBin::right);
  EXPECT_EQ(classify_view(Vec3(7, 7, 0)), ViewBin::front);
  EXPECT_EQ(classify_view(Vec3(-7, 7, 0)), ViewBin::left);
  EXPECT_EQ(classify_view(Vec3(7, -7, 0)), ViewBin::front);
  EXPECT_THROW(classify_view(Vec3(0, 0, 3)), InputError);
}

TEST(ClassifyDistance, Examples) {
  EXPECT_EQ(classify_distance(Vec3(5, 0, 0)), DistanceBin::close);
  EXPECT_EQ(classify_distance(Vec3(0, 15, 0)), DistanceBin::mid);
  EXPECT_EQ(classify_distance(Vec3(30, 30, 0)), DistanceBin::far);
  EXPECT_EQ(classify_distance(Vec3(-29.9, 0, 0)), DistanceBin::mid);
  DistanceThresholds t;
  t.close_max = 3.0;
  EXPECT_EQ(classify_distance(Vec3(5, 0, 0), t), DistanceBin::mid);
}

TEST(PlacementSpecJson, RoundTripAndErrors) {
  PlacementSpec s;
  s.category = Category::pedestrian;
  s.view = ViewBin::left;
  s.distance = DistanceBin::far;
  s.speed = 1.25;
  s.seed = 99;
  const PlacementSpec r = placement_spec_from_json(placement_spec_to_json(s));
  EXPECT_EQ(r.category, s.category);
  EXPECT_EQ(r.view, s.view);
  EXPECT_EQ(r.distance, s.distance);
  EXPECT_EQ(r.speed, s.speed);
  EXPECT_EQ(r.seed, s.seed);
  EXPECT_THROW(placement_spec_from_json(nlohmann::json::parse(R"({"view":"up"})")), InputError);
  EXPECT_THROW(placement_spec_from_json(nlohmann::json::parse(R"({"speed":-1})")), InputError);
  EXPECT_THROW(placement_spec_from_json(nlohmann::json::parse(R"({"colour":"red"})")), InputError);
}

TEST(Collision, Examples) {
  const BBox3D a = rect(0, 0, 1, 1, 0, "a");
  EXPECT_TRUE(check_collision(single(a), one_frame_scene({rect(3, 0, 1, 1, 0, "far")})).ok);
  const CollisionReport same = check_collision(single(a), one_frame_scene({rect(0, 0, 1, 1, 0, "same")}));
  EXPECT_FALSE(same.ok);
  EXPECT_EQ(same.frame, 0u);
  EXPECT_EQ(same.box_id, "same");
}

TEST(Collision, RotatedCornerThreshold) {
  // A: 2x4 at yaw 0, inflated half extents (2.5, 1.5). B: 2x4 at yaw pi/4 on
  // the x axis; its leftmost corner sits 3/sqrt(2) behind its center, so the
  // footprints separate once cx > 2.5 + 3/sqrt(2) (A's x axis is the binding one).
  const double threshold = 2.5 + 3.0 / std::sqrt(2.0);
  const BBox3D a = rect(0, 0, 2, 4, 0, "a");
  EXPECT_TRUE(footprints_overlap(a, rect(threshold - 1e-6, 0, 2, 4, kPi / 4), 0.5));
  EXPECT_FALSE(footprints_overlap(a, rect(threshold + 1e-6, 0, 2, 4, kPi / 4), 0.5));
  EXPECT_FALSE(check_collision(single(a), one_frame_scene({rect(threshold - 1e-3, 0, 2, 4, kPi / 4, "b")})).ok);
  EXPECT_TRUE(check_collision(single(a), one_frame_scene({rect(threshold + 1e-3, 0, 2, 4, kPi / 4, "b")})).ok);
}

TEST(Collision, AgreesWithSamplingOracle) {
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> pos(-4, 4), dim(0.5, 4.5), ang(-kPi, kPi);
  int overlaps = 0;
  for (int i = 0; i < 100; ++i) {
    const BBox3D a = rect(pos(rng), pos(rng), dim(rng), dim(rng), ang(rng));
    const BBox3D b = rect(pos(rng), pos(rng), dim(rng), dim(rng), ang(rng));
    const bool sat = footprints_overlap(a, b);
    EXPECT_EQ(sat, footprints_overlap(b, a)) << i;
    // The sampler never reports a false overlap but can miss slivers; those are
    // settled by exact clipping.
    const bool sampled = oracle::sampled_overlap_window(a, b, 0.0, 10000, 1000 + i);
    if (sampled) EXPECT_TRUE(sat) << i;
    EXPECT_EQ(sat, oracle::intersection_area(a, b) > 0.0) << i;
    overlaps += sat;
  }
  EXPECT_GT(overlaps, 20);
  EXPECT_LT(overlaps, 80);
}

TEST(Visibility, Examples) {
  const SceneBundle scene = load_scene_bundle(kDataDir / "demo/scene");
  const std::size_t cam = 0;
  // On the optical axis of camera 0 at 10 m, in every frame.
  auto on_axis = [&](double dist) {
    Trajectory t;
    for (std::size_t f = 0; f < scene.frame_count(); ++f) {
      const Mat4& c2w = scene.cameras[cam].extrinsics[f];
      Vec3 p = c2w.topRightCorner<3, 1>() + dist * c2w.block<3, 1>(0, 2);
      p.z() = 0.8;
      t.boxes.push_back(rect(p.x(), p.y(), 1.9, 4.4, 0.0));
    }
    return t;
  };
  EXPECT_TRUE(check_visibility(on_axis(10.0), scene).visible);
  const VisibilityReport far = check_visibility(on_axis(500.0), scene);
  EXPECT_FALSE(far.visible);
  for (double a : far.best_area) EXPECT_LT(a, 100.0);
  EXPECT_FALSE(check_visibility(on_axis(-10.0), scene).visible);
}

TEST(Visibility, AreaFallsWithInverseSquare) {
  const SceneBundle scene = load_scene_bundle(kDataDir / "demo/scene");
  const Camera& cam = scene.cameras[0];
  const Mat4& c2w = cam.extrinsics[0];
  auto area = [&](double dist) {
    const Vec3 p = c2w.topRightCorner<3, 1>() + dist * c2w.block<3, 1>(0, 2);
    return projected_hull_area(rect(p.x(), p.y(), 0.5, 0.5, 0.0), cam, 0);
  };
  EXPECT_NEAR(area(40.0) / area(80.0), 4.0, 0.2);
}

TEST(SamplePlacement, FrontMidOnEmptyScene) {
  const SceneBundle scene = empty_scene(fixtures::Rig::stereo_front);
  PlacementSpec spec;
  spec.view = ViewBin::front;
  spec.distance = DistanceBin::mid;
  spec.seed = 7;
  const Trajectory t = sample_placement(scene, spec);
  ASSERT_EQ(t.boxes.size(), scene.frame_count());
  EXPECT_EQ(classify_view(t.boxes[0].center), ViewBin::front);
  EXPECT_EQ(classify_distance(t.boxes[0].center), DistanceBin::mid);
  const Trajectory again = sample_placement(scene, spec);
  for (std::size_t f = 0; f < t.boxes.size(); ++f) EXPECT_TRUE(same_box(t.boxes[f], again.boxes[f]));
}

TEST(SamplePlacement, EveryBinOnSurroundRig) {
  // Far cars stay above the 100 px visibility floor only at this resolution.
  const SceneBundle scene = empty_scene(fixtures::Rig::surround, 256, 192);
  const double dt = 1.0 / scene.meta.fps;
  for (ViewBin v : kAllViewBins)
    for (DistanceBin d : kAllDistanceBins) {
      PlacementSpec spec;
      spec.view = v;
      spec.distance = d;
      spec.speed = 4.0;
      spec.seed = 11;
      const Trajectory t = sample_placement(scene, spec);
      EXPECT_EQ(classify_view(t.boxes[0].center), v);
      EXPECT_EQ(classify_distance(t.boxes[0].center), d);
      EXPECT_TRUE(check_collision(t, scene).ok);
      EXPECT_TRUE(check_visibility(t, scene).visible);
      const Vec3 vel = spec.speed * Vec3(std::cos(t.boxes[0].yaw), std::sin(t.boxes[0].yaw), 0);
      EXPECT_LE(std::abs(t.boxes[0].yaw), 10.0 * kPi / 180.0 + 1e-12);
      for (std::size_t f = 1; f < t.boxes.size(); ++f) {
        EXPECT_LT((t.boxes[f].center - t.boxes[f - 1].center - vel * dt).norm(), 1e-9);
        EXPECT_EQ(t.boxes[f].yaw, t.boxes[0].yaw);
      }
    }
}

TEST(SamplePlacement, DensePackingIsInfeasible) {
  SceneBundle scene = empty_scene(fixtures::Rig::stereo_front);
  std::vector<BBox3D> wall;
  int n = 0;
  for (double x = -35; x <= 35; x += 3)
    for (double y = -35; y <= 35; y += 3) wall.push_back(rect(x, y, 2.5, 2.5, 0.0, "blocker_" + std::to_string(n++)));
  for (auto& frame : scene.boxes) frame = wall;
  PlacementSpec spec;
  spec.seed = 3;
  PlacementOptions opt;
  opt.max_draws = 500;
  try {
    sample_placement(scene, spec, opt);
    FAIL() << "expected NoFeasiblePlacement";
  } catch (const NoFeasiblePlacement& e) {
    EXPECT_NE(std::string(e.what()).find("no feasible placement"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("collision"), std::string::npos);
  }
}

TEST(ExportAnnotations, StaticRoundTripIsExact) {
  testing_support::TempDir tmp;
  Trajectory t;
  t.id = "inserted_0";
  BBox3D b = rect(12.345678901234567, -3.0000000000000004, 1.95, 4.62, 0.1234567890123, "inserted_0");
  b.center.z() = 0.865;
  t.boxes = {b, b};
  export_annotations(t, {{}, {}}, tmp / "boxes.json");
  const auto j = nlohmann::json::parse(testing_support::read_bytes(tmp / "boxes.json"));
  for (int f = 0; f < 2; ++f) {
    const BBox3D r = box_from_json(j["frames"][f][0], "test");
    EXPECT_TRUE(same_box(r, b));
  }
}

TEST(ExportAnnotations, ConstantVelocityRecords) {
  testing_support::TempDir tmp;
  Trajectory t;
  t.id = "mover";
  for (int f = 0; f < 4; ++f) t.boxes.push_back(rect(10 + 0.5 * f, 2, 1.9, 4.4, 0.0, "mover"));
  export_annotations(t, {{}, {}, {}, {}}, tmp / "boxes.json");
  const auto j = nlohmann::json::parse(testing_support::read_bytes(tmp / "boxes.json"));
  ASSERT_EQ(j["frames"].size(), 4u);
  for (int f = 0; f < 4; ++f) {
    ASSERT_EQ(j["frames"][f].size(), 1u);
    EXPECT_EQ(j["frames"][f][0]["center"][0].get<double>(), 10 + 0.5 * f);
  }
}

TEST(ExportAnnotations, MergePreservesOriginalBytes) {
  testing_support::TempDir tmp;
  const fs::path src = kDataDir / "demo/scene/boxes.json";
  const std::string original = testing_support::read_bytes(src);
  const SceneBundle scene = load_scene_bundle(kDataDir / "demo/scene");
  Trajectory t;
  t.id = "inserted_0";
  for (std::size_t f = 0; f < scene.frame_count(); ++f) t.boxes.push_back(rect(9, -2, 1.9, 4.4, 0.0, "inserted_0"));
  export_annotations(t, scene.boxes, tmp / "boxes.json");
  // Diff oracle: removing the appended record must give back the input file.
  auto j = nlohmann::ordered_json::parse(testing_support::read_bytes(tmp / "boxes.json"));
  for (auto& frame : j["frames"]) {
    ASSERT_EQ(frame.back()["id"], "inserted_0");
    frame.erase(frame.size() - 1);
  }
  EXPECT_EQ(j.dump(2) + "\n", original);
  t.id = "parked_car";
  EXPECT_THROW(export_annotations(t, scene.boxes, tmp / "dup.json"), InputError);
}
