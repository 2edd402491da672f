#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drivedit/compositor.hpp"
#include "drivedit/guidance.hpp"
#include "drivedit/mesh.hpp"
#include "drivedit/placement.hpp"

namespace drivedit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitTotalFailure = 3;
inline constexpr int kReportSchemaVersion = 1;

struct PipelineConfig {
  std::filesystem::path scene;
  std::filesystem::path assets;
  std::vector<PlacementSpec> placements;
  GuidanceParams guidance;
  CompositeConfig composite;
  FitMode fit_mode = FitMode::per_axis;
  std::filesystem::path output;
  int workers = 1;
  std::uint64_t seed = 0;

  /// Relative paths resolve against `base_dir`. Unknown keys are rejected.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);
  /// Paths exist, workers >= 1, nested configs valid. Throws InputError.
  void validate() const;
};

/// How far each placement spec is carried.
enum class Stage {
  place,         ///< trajectory + boxes.json
  render_asset,  ///< + object color/mask per view and frame
  guidance,      ///< + D/N/E/O/M maps
  edit,          ///< + naive composites
};

struct RunOptions {
  Stage stage = Stage::edit;
  /// Adds wall-clock timings to report.json (off keeps output trees byte-identical).
  bool timing = false;
};

struct RunResult {
  nlohmann::ordered_json report;
  int exit_code = kExitOk;
};

/// Seed used for placement spec `index`: a substream of the root seed keyed by
/// the index and the spec's own seed.
std::uint64_t placement_seed(std::uint64_t root, std::size_t index, std::uint64_t spec_seed);

/// Processes every placement spec into <output>/spec_<i>/ and writes
/// <output>/report.json. Per-spec failures are recorded in the report; the
/// exit code is kExitTotalFailure only when every spec fails.
RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

}  // namespace drivedit
