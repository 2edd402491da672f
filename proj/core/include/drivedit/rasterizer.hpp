#pragma once

#include "drivedit/image.hpp"
#include "drivedit/mesh.hpp"
#include "drivedit/scene_model.hpp"

namespace drivedit {

struct DirectionalLight {
  Vec3 direction = Vec3(0.3, -0.5, -0.8).normalized();  ///< world, unit, points from the light
  double ambient = 0.35;
  double diffuse = 0.65;

  /// Throws InputError unless |direction| = 1 ± 1e-9, ambient/diffuse in [0,1], sum <= 1.
  void validate() const;
};

/// Object image O, object mask M and asset depth for one view/frame.
/// Invariant: mask = 1 exactly where depth is finite; color is 0 where mask = 0.
struct ObjectRender {
  ImageU8 color;
  Mask mask;
  DepthMap depth;  ///< meters, +inf where mask = 0

  static ObjectRender empty(int width, int height);
};

inline constexpr double kNearPlane = 0.1;
inline constexpr double kDepthTieTolerance = 1e-9;
inline constexpr double kSubpixelSteps = 256.0;

/// albedo * clamp(ambient + diffuse * max(0, n·(-dir)), 0, 1)
Vec3 shade_lambert(const Vec3& face_normal, const DirectionalLight& light, const Vec3& albedo);

/// Z-buffered rasterization of `mesh` placed by `transform`, seen from
/// `camera` at `frame`. Triangles are clipped at z = kNearPlane, snapped to a
/// 1/256 px grid and filled with the top-left rule (pixel centers at +0.5).
/// Depth is interpolated perspective-correctly; nearer fragments win and
/// depth ties within 1e-9 m go to the smaller triangle index. Faces are
/// two-sided: the face normal is flipped toward the camera before shading.
/// Rows are split across `workers` threads; output is independent of it.
ObjectRender render_asset(const Mesh& mesh, const AssetTransform& transform, const Camera& camera,
                          std::size_t frame, const DirectionalLight& light = {}, int workers = 1);

}  // namespace drivedit
