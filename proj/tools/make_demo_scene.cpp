// Writes the procedural demo scene bundle and a small asset catalog.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drivedit/fixtures.hpp"
#include "drivedit/mesh.hpp"

namespace fs = std::filesystem;
using namespace drivedit;

int main(int argc, char** argv) {
  CLI::App app{"write the procedural demo scene and asset catalog"};
  std::string out;
  std::string rig = "stereo";
  fixtures::SceneOptions opt;
  bool no_depth = false;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--rig", rig, "stereo or surround")->check(CLI::IsMember({"stereo", "surround"}));
  app.add_option("--width", opt.width)->check(CLI::PositiveNumber);
  app.add_option("--height", opt.height)->check(CLI::PositiveNumber);
  app.add_option("--frames", opt.frames)->check(CLI::PositiveNumber);
  app.add_flag("--no-depth", no_depth, "omit depth maps");
  CLI11_PARSE(app, argc, argv);
  opt.rig = rig == "surround" ? fixtures::Rig::surround : fixtures::Rig::stereo_front;
  opt.with_depth = !no_depth;

  try {
    save_scene_bundle(fixtures::make_demo_scene(opt), fs::path(out) / "scene");
    const fs::path assets = fs::path(out) / "assets";
    fs::create_directories(assets);
    std::ofstream(assets / "toy_car.obj") << to_obj(fixtures::make_toy_car_mesh());
    std::ofstream(assets / "unit_box.obj") << to_obj(fixtures::make_box_mesh(Vec3(-0.5, -0.5, 0.0), Vec3(0.5, 0.5, 1.0)));
    const nlohmann::ordered_json catalog = nlohmann::ordered_json::array({
        {{"id", "toy_car"}, {"category", "car"}, {"path", "toy_car.obj"}, {"base_color", {0.8, 0.1, 0.1}}},
        {{"id", "pedestrian_box"}, {"category", "pedestrian"}, {"path", "unit_box.obj"}, {"base_color", {0.2, 0.3, 0.8}}},
        {{"id", "cone_box"}, {"category", "traffic_cone"}, {"path", "unit_box.obj"}, {"base_color", {1.0, 0.5, 0.0}}},
    });
    std::ofstream(assets / "assets.json") << catalog.dump(2) << "\n";
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
