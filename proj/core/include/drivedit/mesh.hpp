#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "drivedit/scene_model.hpp"

namespace drivedit {

/// Triangle mesh in the canonical asset frame (meters, +x forward, +z up).
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Vec3> vertex_colors;  ///< empty, or one RGB in [0,1] per vertex
  Vec3 base_color = Vec3(0.7, 0.7, 0.7);
  std::size_t dropped_degenerate = 0;  ///< zero-area triangles removed at load

  bool has_vertex_colors() const { return !vertex_colors.empty(); }
};

/// Placement of an asset: p_world = Rz(yaw) * (scale ⊙ p) + translation.
struct AssetTransform {
  Vec3 scale = Vec3::Ones();
  double yaw = 0.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const;
};

struct Aabb {
  Vec3 min;
  Vec3 max;
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
};

enum class FitMode { per_axis, uniform };
FitMode parse_fit_mode(std::string_view name);

inline constexpr double kDegenerateArea = 1e-12;

/// Parses the OBJ subset: `v x y z [r g b]`, `f` with any number of corners
/// (fan-triangulated as 1-2-3, 1-3-4, ...; `i/t/n` forms and negative indices
/// accepted) and `#` comments. Other statements are ignored. Vertex colors are
/// kept only when every vertex carries them.
Mesh parse_obj(std::string_view text);
Mesh load_obj(const std::filesystem::path& path);
std::string to_obj(const Mesh& mesh);

/// Bounds over vertices referenced by at least one triangle.
Aabb mesh_aabb(const Mesh& mesh);

/// per_axis: the transformed AABB equals the box exactly.
/// uniform: scale = min ratio on every axis, bottom-centered in the box.
AssetTransform fit_mesh_to_box(const Mesh& mesh, const BBox3D& box, FitMode mode = FitMode::per_axis);

struct AssetEntry {
  std::string id;
  Category category = Category::car;
  std::filesystem::path path;  ///< resolved against the catalog directory
  Vec3 base_color = Vec3(0.7, 0.7, 0.7);
};

std::vector<AssetEntry> load_asset_catalog(const std::filesystem::path& path);
/// Loads the mesh for an entry and applies the catalog base color.
Mesh load_asset(const AssetEntry& entry);

}  // namespace drivedit
