#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "drivedit/pipeline.hpp"
#include "drivedit/png_io.hpp"
#include "support/helpers.hpp"

using namespace drivedit;
namespace fs = std::filesystem;
using testing_support::TempDir;

namespace {

const fs::path kDemo = fs::path(DRIVEDIT_TEST_DATA_DIR) / "demo";

nlohmann::json base_json() {
  return nlohmann::json::parse(testing_support::read_bytes(kDemo / "edit_config.json"));
}

PipelineConfig config_with(nlohmann::json j, const fs::path& out) {
  j["output"] = out.string();
  return PipelineConfig::from_json(j, kDemo);
}

nlohmann::json infeasible_spec() {
  // The stereo rig sees nothing behind the ego vehicle.
  return {{"category", "car"}, {"view", "back"}, {"distance", "mid"}, {"speed", 0.0}, {"seed", 9}};
}

}  // namespace

TEST(PipelineConfig, ParsesAndResolvesPaths) {
  const PipelineConfig c = PipelineConfig::load(kDemo / "edit_config.json");
  EXPECT_EQ(c.scene, kDemo / "scene");
  EXPECT_EQ(c.assets, kDemo / "assets/assets.json");
  EXPECT_EQ(c.output, kDemo / "out");
  EXPECT_EQ(c.placements.size(), 2u);
  EXPECT_EQ(c.seed, 2024u);
  EXPECT_NO_THROW(c.validate());
}

TEST(PipelineConfig, Errors) {
  auto j = base_json();
  j["colour"] = "blue";
  EXPECT_THROW(PipelineConfig::from_json(j, kDemo), InputError);
  j = base_json();
  j["guidance"]["sigma"] = 2;
  EXPECT_THROW(PipelineConfig::from_json(j, kDemo), InputError);
  j = base_json();
  j["scene"] = "no_such_scene";
  EXPECT_THROW(PipelineConfig::from_json(j, kDemo).validate(), InputError);
  j = base_json();
  j["workers"] = 0;
  EXPECT_THROW(PipelineConfig::from_json(j, kDemo).validate(), InputError);
  EXPECT_THROW(PipelineConfig::load(kDemo / "missing.json"), InputError);
}

TEST(PlacementSeed, DerivedPerIndex) {
  EXPECT_EQ(placement_seed(1, 0, 5), placement_seed(1, 0, 5));
  EXPECT_NE(placement_seed(1, 0, 5), placement_seed(1, 1, 5));
  EXPECT_NE(placement_seed(1, 0, 5), placement_seed(2, 0, 5));
  EXPECT_NE(placement_seed(1, 0, 5), placement_seed(1, 0, 6));
}

TEST(Pipeline, EditWritesEveryOutput) {
  TempDir tmp;
  const RunResult r = run_pipeline(config_with(base_json(), tmp.path()));
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.report["succeeded"], 2);
  EXPECT_EQ(r.report["failed"], 0);
  EXPECT_EQ(r.report["schema_version"], kReportSchemaVersion);
  EXPECT_FALSE(r.report["specs"][0].contains("timing"));
  const auto on_disk = nlohmann::json::parse(testing_support::read_bytes(tmp / "report.json"));
  EXPECT_EQ(on_disk, nlohmann::json(r.report));

  const SceneBundle scene = load_scene_bundle(kDemo / "scene");
  for (int i = 0; i < 2; ++i) {
    const fs::path dir = tmp / ("spec_" + std::to_string(i));
    const auto boxes = nlohmann::json::parse(testing_support::read_bytes(dir / "boxes.json"));
    ASSERT_EQ(boxes["frames"].size(), scene.frame_count());
    for (std::size_t f = 0; f < scene.frame_count(); ++f) {
      EXPECT_EQ(boxes["frames"][f].back()["id"], "inserted_" + std::to_string(i));
      for (const std::string& cam : scene.meta.cameras) {
        const std::string stem = frame_stem(f);
        for (const char* k : {"depth", "normal", "edge", "object", "mask"})
          EXPECT_TRUE(fs::exists(dir / "guidance" / cam / (stem + "_" + k + ".png"))) << stem << k;
        const ImageU8 edited = png::read_u8(dir / "frames_edited" / cam / (stem + ".png"), 3);
        EXPECT_TRUE(edited.same_shape(scene.frames[0][0]));
      }
    }
  }
}

TEST(Pipeline, InfeasibleSpecIsReportedNotFatal) {
  TempDir tmp;
  auto j = base_json();
  j["placements"][1] = infeasible_spec();
  const RunResult r = run_pipeline(config_with(j, tmp.path()));
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.report["succeeded"], 1);
  EXPECT_EQ(r.report["failed"], 1);
  EXPECT_EQ(r.report["specs"][1]["status"], "no feasible placement");
  EXPECT_NE(r.report["specs"][1]["message"].get<std::string>().find("back"), std::string::npos);
  EXPECT_TRUE(fs::exists(tmp / "spec_0/frames_edited"));
}

TEST(Pipeline, AllSpecsFailing) {
  TempDir tmp;
  auto j = base_json();
  j["placements"] = nlohmann::json::array({infeasible_spec()});
  const RunResult r = run_pipeline(config_with(j, tmp.path()));
  EXPECT_EQ(r.exit_code, kExitTotalFailure);
  EXPECT_TRUE(fs::exists(tmp / "report.json"));
}

TEST(Pipeline, MissingCategoryAsset) {
  TempDir tmp;
  auto j = base_json();
  j["placements"][1]["category"] = "bus";
  const RunResult r = run_pipeline(config_with(j, tmp.path()));
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.report["specs"][1]["status"], "error");
  EXPECT_NE(r.report["specs"][1]["message"].get<std::string>().find("no asset for category"), std::string::npos);
}

TEST(Pipeline, StagesStopEarly) {
  TempDir a, b;
  run_pipeline(config_with(base_json(), a.path()), RunOptions{Stage::place, false});
  EXPECT_TRUE(fs::exists(a / "spec_0/boxes.json"));
  EXPECT_FALSE(fs::exists(a / "spec_0/guidance"));
  EXPECT_FALSE(fs::exists(a / "spec_0/frames_edited"));
  run_pipeline(config_with(base_json(), b.path()), RunOptions{Stage::render_asset, false});
  EXPECT_TRUE(fs::exists(b / "spec_0/render"));
  EXPECT_FALSE(fs::exists(b / "spec_0/guidance"));
}

TEST(Pipeline, TimingIsOptIn) {
  TempDir tmp;
  const RunResult r = run_pipeline(config_with(base_json(), tmp.path()), RunOptions{Stage::edit, true});
  EXPECT_TRUE(r.report["specs"][0].contains("timing"));
}

TEST(Pipeline, ByteIdenticalAcrossRunsAndWorkers) {
  TempDir a, b, c;
  auto j = base_json();
  j["placements"].push_back(infeasible_spec());
  run_pipeline(config_with(j, a.path()));
  run_pipeline(config_with(j, b.path()));
  j["workers"] = 4;
  run_pipeline(config_with(j, c.path()));
  const auto ta = testing_support::snapshot_tree(a.path());
  EXPECT_GT(ta.size(), 90u);
  EXPECT_TRUE(ta == testing_support::snapshot_tree(b.path()));
  EXPECT_TRUE(ta == testing_support::snapshot_tree(c.path()));
}
