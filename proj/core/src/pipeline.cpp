#include "drivedit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <fmt/format.h>

#include "drivedit/error.hpp"
#include "drivedit/parallel.hpp"
#include "drivedit/png_io.hpp"
#include "drivedit/rasterizer.hpp"
#include "drivedit/rng.hpp"

namespace drivedit {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> keys, std::string_view ctx) {
  if (!j.is_object()) throw InputError(fmt::format("{}: expected an object", ctx));
  for (const auto& [key, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw InputError(fmt::format("{}: unknown key '{}'", ctx, key));
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(fmt::format("cannot write {}", path.string()));
  os << text;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const fs::path& base) {
  reject_unknown(j, {"scene", "assets", "placements", "guidance", "composite", "fit_mode", "output", "workers", "seed"},
                 "config");
  PipelineConfig c;
  try {
    c.scene = resolve(base, j.at("scene").get<std::string>());
    if (j.contains("assets")) c.assets = resolve(base, j.at("assets").get<std::string>());
    if (j.contains("output")) c.output = resolve(base, j.at("output").get<std::string>());
    if (j.contains("placements")) {
      for (const auto& s : j.at("placements")) c.placements.push_back(placement_spec_from_json(s));
    }
    if (j.contains("guidance")) {
      const auto& g = j.at("guidance");
      reject_unknown(g, {"canny_low", "canny_high", "dilation", "flat_ground_fallback"}, "config.guidance");
      c.guidance.canny_low = g.value("canny_low", c.guidance.canny_low);
      c.guidance.canny_high = g.value("canny_high", c.guidance.canny_high);
      c.guidance.dilation = g.value("dilation", c.guidance.dilation);
      c.guidance.flat_ground_fallback = g.value("flat_ground_fallback", c.guidance.flat_ground_fallback);
    }
    if (j.contains("composite")) {
      const auto& k = j.at("composite");
      reject_unknown(k, {"depth_bias", "feather"}, "config.composite");
      c.composite.depth_bias = k.value("depth_bias", c.composite.depth_bias);
      c.composite.feather = k.value("feather", c.composite.feather);
    }
    if (j.contains("fit_mode")) c.fit_mode = parse_fit_mode(j.at("fit_mode").get<std::string>());
    c.workers = j.value("workers", c.workers);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("config: {}", e.what()));
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError(fmt::format("config not found: {}", path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("config {}: {}", path.string(), e.what()));
  }
  return from_json(j, path.parent_path());
}

void PipelineConfig::validate() const {
  if (scene.empty() || !fs::is_directory(scene)) throw InputError(fmt::format("scene not found: {}", scene.string()));
  if (assets.empty() || !fs::is_regular_file(assets)) {
    throw InputError(fmt::format("asset catalog not found: {}", assets.string()));
  }
  if (output.empty()) throw InputError("output root not set");
  if (workers < 1) throw InputError("workers must be >= 1");
  if (guidance.canny_low < 0 || guidance.canny_high < guidance.canny_low) {
    throw InputError("guidance: need 0 <= canny_low <= canny_high");
  }
  if (guidance.dilation < 0) throw InputError("guidance: dilation must be >= 0");
  composite.validate();
}

std::uint64_t placement_seed(std::uint64_t root, std::size_t index, std::uint64_t spec_seed) {
  return substream_seed(root, fmt::format("placement/{}/{}", index, spec_seed));
}

namespace {

struct SpecOutcome {
  nlohmann::ordered_json entry;
  bool ok = false;
};

SpecOutcome run_spec(const PipelineConfig& cfg, const RunOptions& opt, const SceneBundle& scene,
                     const std::vector<AssetEntry>& catalog, std::size_t index) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  const PlacementSpec& requested = cfg.placements[index];
  PlacementSpec spec = requested;
  spec.seed = placement_seed(cfg.seed, index, requested.seed);
  const std::string name = fmt::format("spec_{}", index);
  const fs::path dir = cfg.output / name;

  SpecOutcome out;
  out.entry["index"] = index;
  out.entry["spec"] = placement_spec_to_json(requested);
  out.entry["placement_seed"] = spec.seed;
  nlohmann::ordered_json timing;
  auto lap = [&](const char* key, Clock::time_point since) {
    timing[key] = std::chrono::duration<double>(Clock::now() - since).count();
  };

  try {
    const auto asset = std::find_if(catalog.begin(), catalog.end(),
                                    [&](const AssetEntry& e) { return e.category == spec.category; });
    if (asset == catalog.end()) {
      throw InputError(fmt::format("no asset for category '{}'", to_string(spec.category)));
    }
    PlacementOptions popt;
    popt.id = fmt::format("inserted_{}", index);
    const Trajectory traj = sample_placement(scene, spec, popt);
    lap("place_s", t0);
    out.entry["asset"] = asset->id;
    out.entry["object_id"] = traj.id;

    fs::create_directories(dir);
    nlohmann::ordered_json outputs;
    export_annotations(traj, scene.boxes, dir / "boxes.json");
    outputs["boxes"] = (fs::path(name) / "boxes.json").generic_string();

    if (opt.stage != Stage::place) {
      const auto t1 = Clock::now();
      const Mesh mesh = load_asset(*asset);
      const std::size_t V = scene.cameras.size(), T = scene.frame_count();
      std::vector<AssetTransform> transforms;
      for (std::size_t f = 0; f < T; ++f) transforms.push_back(fit_mesh_to_box(mesh, traj.boxes[f], cfg.fit_mode));
      std::vector<std::vector<ObjectRender>> renders(V, std::vector<ObjectRender>(T));
      parallel_for(V * T, cfg.workers, [&](std::size_t job) {
        const std::size_t v = job / T, f = job % T;
        renders[v][f] = render_asset(mesh, transforms[f], scene.cameras[v], f);
      });
      lap("render_s", t1);

      if (opt.stage == Stage::render_asset) {
        for (const Camera& cam : scene.cameras) fs::create_directories(dir / "render" / cam.name);
        parallel_for(V * T, cfg.workers, [&](std::size_t job) {
          const std::size_t v = job / T, f = job % T;
          const fs::path cam_dir = dir / "render" / scene.cameras[v].name;
          png::write(cam_dir / (frame_stem(f) + "_object.png"), renders[v][f].color);
          ImageU8 mask(renders[v][f].mask.width(), renders[v][f].mask.height(), 1, 0);
          for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x) mask.at(x, y) = renders[v][f].mask.at(x, y) ? 255 : 0;
          png::write(cam_dir / (frame_stem(f) + "_mask.png"), mask);
        });
        outputs["render"] = (fs::path(name) / "render").generic_string();
      } else {
        const auto t2 = Clock::now();
        const auto guidance = build_guidance(scene, renders, cfg.guidance, cfg.workers);
        for (const Camera& cam : scene.cameras) fs::create_directories(dir / "guidance" / cam.name);
        parallel_for(V * T, cfg.workers, [&](std::size_t job) {
          const std::size_t v = job / T, f = job % T;
          write_guidance(dir / "guidance", scene.cameras[v].name, f, guidance[v][f]);
        });
        lap("guidance_s", t2);
        outputs["guidance"] = (fs::path(name) / "guidance").generic_string();

        if (opt.stage == Stage::edit) {
          const auto t3 = Clock::now();
          for (const Camera& cam : scene.cameras) fs::create_directories(dir / "frames_edited" / cam.name);
          parallel_for(V * T, cfg.workers, [&](std::size_t job) {
            const std::size_t v = job / T, f = job % T;
            const DepthMap* depth = scene.has_depth(v) ? &scene.depth[v][f] : nullptr;
            const ImageU8 edited = composite_naive(scene.frames[v][f], renders[v][f], depth, cfg.composite);
            png::write(dir / "frames_edited" / scene.cameras[v].name / (frame_stem(f) + ".png"), edited);
          });
          lap("composite_s", t3);
          outputs["frames_edited"] = (fs::path(name) / "frames_edited").generic_string();
        }
      }
    }
    out.entry["status"] = "ok";
    out.entry["outputs"] = outputs;
    out.ok = true;
  } catch (const NoFeasiblePlacement& e) {
    out.entry["status"] = "no feasible placement";
    out.entry["message"] = e.what();
  } catch (const std::exception& e) {
    out.entry["status"] = "error";
    out.entry["message"] = e.what();
  }
  lap("total_s", t0);
  if (opt.timing) out.entry["timing"] = timing;
  return out;
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  const SceneBundle scene = load_scene_bundle(cfg.scene);
  const auto catalog = load_asset_catalog(cfg.assets);
  fs::create_directories(cfg.output);

  RunResult result;
  result.report["schema_version"] = kReportSchemaVersion;
  result.report["scene"] = scene.meta.scene_id;
  result.report["seed"] = cfg.seed;
  result.report["specs"] = nlohmann::ordered_json::array();
  std::size_t ok = 0;
  for (std::size_t i = 0; i < cfg.placements.size(); ++i) {
    SpecOutcome o = run_spec(cfg, opt, scene, catalog, i);
    ok += o.ok ? 1 : 0;
    result.report["specs"].push_back(std::move(o.entry));
  }
  result.report["succeeded"] = ok;
  result.report["failed"] = cfg.placements.size() - ok;
  result.exit_code = (!cfg.placements.empty() && ok == 0) ? kExitTotalFailure : kExitOk;
  write_text(cfg.output / "report.json", result.report.dump(2) + "\n");
  return result;
}

}  // namespace drivedit
