#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "drivedit/error.hpp"
#include "drivedit/pipeline.hpp"
#include "drivedit/png_io.hpp"
#include "drivedit/rfdit/checkpoint.hpp"
#include "drivedit/rfdit/flow.hpp"
#include "drivedit/rfdit/train.hpp"
#include "drivedit/rng.hpp"

namespace fs = std::filesystem;
using namespace drivedit;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  bool timing = false;
};

void add_common(CLI::App* app, CommonFlags& f, bool config_required) {
  auto* opt = app->add_option("--config", f.config, "JSON config file");
  if (config_required) opt->required();
  app->add_option("--seed", f.seed, "root seed (overrides config)");
  app->add_option("--workers", f.workers, "worker threads (overrides config)")->check(CLI::PositiveNumber);
  app->add_option("--out", f.out, "output directory (overrides config)");
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(fmt::format("cannot write {}", path.string()));
  os << j.dump(2) << "\n";
}

int run_stage(const CommonFlags& f, Stage stage) {
  PipelineConfig cfg = PipelineConfig::load(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  if (!f.out.empty()) cfg.output = f.out;
  const RunResult r = run_pipeline(cfg, RunOptions{stage, f.timing});
  for (const auto& spec : r.report["specs"]) {
    std::fprintf(stderr, "spec %s: %s\n", spec["index"].dump().c_str(), spec["status"].get<std::string>().c_str());
  }
  return r.exit_code;
}

rfdit::TrainConfig load_train_config(const CommonFlags& f) {
  rfdit::TrainConfig cfg;
  if (!f.config.empty()) {
    std::ifstream is(f.config);
    if (!is) throw InputError(fmt::format("config not found: {}", f.config));
    try {
      cfg = rfdit::TrainConfig::from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(fmt::format("config {}: {}", f.config, e.what()));
    }
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  cfg.validate();
  return cfg;
}

int toy_train(const CommonFlags& f, std::optional<int> steps) {
  rfdit::TrainConfig cfg = load_train_config(f);
  if (steps) cfg.steps = *steps;
  const fs::path out = f.out.empty() ? fs::path("toy_out") : fs::path(f.out);
  fs::create_directories(out);

  const rfdit::TrainingData data(rfdit::make_toy_fixture(), cfg);
  rfdit::ToyModel model(cfg.model, substream_seed(cfg.seed, "toy/init"));
  const auto start = std::chrono::steady_clock::now();
  const rfdit::TrainResult result = rfdit::train_toy(model, data, cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  rfdit::save_checkpoint(model, out / "checkpoint.bin");
  rfdit::write_loss_csv(result.curve, out / "loss.csv");
  nlohmann::ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["config"] = cfg.to_json();
  report["parameter_count"] = model.parameter_count();
  report["initial_loss"] = result.curve.front().total;
  report["final_loss"] = result.curve.back().total;
  report["loss_ratio"] = result.curve.back().total / result.curve.front().total;
  report["masked_psnr_db"] = result.masked_psnr_db;
  if (f.timing) report["train_s"] = seconds;
  write_json(out / "train_report.json", report);
  std::fprintf(stderr, "loss %.6g -> %.6g, masked PSNR %.2f dB\n", result.curve.front().total,
               result.curve.back().total, result.masked_psnr_db);
  return kExitOk;
}

int toy_sample(const CommonFlags& f, const std::string& checkpoint, int steps, double scale, bool zero_velocity) {
  const std::uint64_t seed = f.seed.value_or(0);
  const fs::path out = f.out.empty() ? fs::path("toy_sample") : fs::path(f.out);
  if (steps < 1) throw InputError("--steps must be >= 1");

  const rfdit::TrainingData data(rfdit::make_toy_fixture(), rfdit::TrainConfig{});
  const std::uint64_t noise_seed = substream_seed(seed, "toy/sample");
  rfdit::Latent z;
  if (zero_velocity) {
    const rfdit::VelocityField zero = [](const rfdit::Latent& x, double) {
      return rfdit::Latent::zeros(x.shape);
    };
    z = rfdit::rf_sample(zero, data.shape, steps, noise_seed);
  } else {
    if (checkpoint.empty()) throw InputError("--checkpoint is required unless --zero-velocity is given");
    const rfdit::ToyModel model = rfdit::load_checkpoint(checkpoint);
    z = rfdit::sample_model(model, data.conds, data.shape, steps, scale, noise_seed);
  }
  const rfdit::Frames images = data.codec.decode(z);
  for (int v = 0; v < images.views; ++v) {
    const fs::path dir = out / fmt::format("view_{}", v);
    fs::create_directories(dir);
    for (int fr = 0; fr < images.frames; ++fr) {
      png::write(dir / (frame_stem(static_cast<std::size_t>(fr)) + ".png"), rfdit::load_image(images, v, fr));
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D-aware scene editing for multi-camera driving sequences"};
  app.require_subcommand(1);

  struct StageCmd {
    const char* name;
    const char* help;
    Stage stage;
  };
  const StageCmd stage_cmds[] = {
      {"edit", "place, render, build guidance and composite every placement spec", Stage::edit},
      {"guidance", "place, render and write guidance maps", Stage::guidance},
      {"place", "sample trajectories and write boxes.json", Stage::place},
      {"render-asset", "place and write per-view object renders", Stage::render_asset},
  };
  CommonFlags flags;
  std::optional<Stage> chosen;
  for (const auto& c : stage_cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, flags, true);
    sub->add_flag("--timing", flags.timing, "record wall-clock timings in report.json");
    sub->callback([&chosen, stage = c.stage] { chosen = stage; });
  }

  CLI::App* toy = app.add_subcommand("toy", "toy-scale generative model");
  toy->require_subcommand(1);
  CLI::App* train = toy->add_subcommand("train", "overfit the toy model on the built-in fixture");
  add_common(train, flags, false);
  std::optional<int> train_steps;
  train->add_option("--steps", train_steps, "training steps (overrides config)");
  train->add_flag("--timing", flags.timing, "record wall-clock time in train_report.json");

  CLI::App* sample = toy->add_subcommand("sample", "sample latents and write decoded PNGs");
  add_common(sample, flags, false);
  std::string checkpoint;
  int sample_steps = 50;
  double cfg_scale = 1.0;
  bool zero_velocity = false;
  sample->add_option("--checkpoint", checkpoint, "checkpoint written by toy train");
  sample->add_option("--steps", sample_steps, "Euler steps");
  sample->add_option("--cfg-scale", cfg_scale, "classifier-free guidance scale");
  sample->add_flag("--zero-velocity", zero_velocity, "use v = 0 instead of a model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  try {
    if (chosen) return run_stage(flags, *chosen);
    if (train->parsed()) return toy_train(flags, train_steps);
    if (sample->parsed()) return toy_sample(flags, checkpoint, sample_steps, cfg_scale, zero_velocity);
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitTotalFailure;
  }
  return kExitConfigError;
}
