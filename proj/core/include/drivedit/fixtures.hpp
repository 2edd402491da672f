#pragma once

// Procedural scenes and assets for tests, benchmarks and the toy training
// run. Everything here is deterministic.

#include "drivedit/mesh.hpp"
#include "drivedit/scene_model.hpp"

namespace drivedit::fixtures {

enum class Rig {
  stereo_front,  ///< two overlapping front cameras (yaw +25 / -25 deg)
  surround,      ///< six cameras covering 360 deg
};

struct SceneOptions {
  int width = 64;
  int height = 48;
  std::size_t frames = 4;
  double fps = 10.0;
  double ego_speed = 5.0;  ///< m/s along ego x
  Rig rig = Rig::stereo_front;
  bool with_depth = true;
  bool with_parked_car = true;
};

/// Ground-plane checkerboard under a sky gradient, seen from a moving ego,
/// optionally with a parked car box rendered into frames and depth.
SceneBundle make_demo_scene(const SceneOptions& options = {});

/// Axis-aligned box mesh spanning [min, max] with 12 outward triangles.
Mesh make_box_mesh(const Vec3& min, const Vec3& max, const Vec3& color = Vec3(0.7, 0.7, 0.7));

/// Two-box car (body + cabin) with per-vertex colors, ~4.2 m long, +x forward.
Mesh make_toy_car_mesh();

/// Appends `b` to `a` (vertex colors kept only if both have them).
Mesh merge_meshes(const Mesh& a, const Mesh& b);

}  // namespace drivedit::fixtures
