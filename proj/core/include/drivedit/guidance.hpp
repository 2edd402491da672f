#pragma once

#include <filesystem>
#include <vector>

#include "drivedit/image.hpp"
#include "drivedit/rasterizer.hpp"
#include "drivedit/scene_model.hpp"

namespace drivedit {

inline constexpr std::uint8_t kNullDepth = 0;
inline constexpr std::uint8_t kNullEdge = 0;
inline constexpr std::uint8_t kNullNormal = 128;  ///< per channel: encoding of the zero vector

/// The five conditioning maps for one view/frame.
struct GuidanceSet {
  ImageU8 depth;   ///< D: normalized inverse depth, 0 = invalid/null
  ImageU8 normal;  ///< N: round((n + 1) / 2 * 255), camera frame
  Mask edge;       ///< E: 0/1
  ImageU8 object;  ///< O
  Mask mask;       ///< M: 0/1, identical to the rasterizer mask
};

struct GuidanceParams {
  double canny_low = 50.0;
  double canny_high = 150.0;
  int dilation = 5;
  /// When a camera has no scene depth, intersect pixel rays with the ground
  /// plane z = 0 (sky pixels invalid). Without it, missing depth is an error.
  bool flat_ground_fallback = true;
};

/// q = 1/z over valid pixels mapped affinely to [1, 255] (nearest -> 255);
/// a constant-depth frame maps to 255; invalid pixels -> 0.
ImageU8 normalize_depth(const DepthMap& depth, const Mask& valid);
/// Same with validity = finite and > 0.
ImageU8 normalize_depth(const DepthMap& depth);

/// Surface normals from metric depth by back-projecting pixel centers and
/// taking central differences (one-sided at the border). Normals point toward
/// the camera (n . P <= 0). Pixels whose depth or 4-neighbours are invalid get
/// the zero-vector encoding.
ImageU8 depth_to_normal(const DepthMap& depth, const Mat3& intrinsics);

/// Canny edges: 5x5 Gaussian (sigma 1.4, integer weights / 159), 3x3 Sobel
/// with replicated borders, magnitude = hypot, direction quantized to
/// 0/45/90/135 degrees, non-maximum suppression keeping a pixel when it is
/// strictly greater than its backward neighbour and not smaller than its
/// forward neighbour (out-of-image neighbours count as 0), then hysteresis:
/// magnitude > high seeds, magnitude > low extends, 8-connected.
/// On a step edge the line lands on the last pixel before the step.
Mask canny_edges(const ImageU8& gray, double low, double high);

/// Nulls D, N and E wherever dilate(M, radius) is set.
GuidanceSet mask_foreground(GuidanceSet guidance, int dilation_radius);

/// Camera depth of the ground plane z = 0 per pixel center; 0 where the ray misses.
DepthMap flat_ground_depth(const Camera& camera, std::size_t frame);

/// Guidance for one view/frame from its RGB frame, metric depth and render.
GuidanceSet build_guidance_view(const ImageU8& frame, const DepthMap& depth, const Mat3& intrinsics,
                                const ObjectRender& render, const GuidanceParams& params);

/// Guidance for every (camera, frame); renders are indexed [camera][frame].
std::vector<std::vector<GuidanceSet>> build_guidance(const SceneBundle& scene,
                                                     const std::vector<std::vector<ObjectRender>>& renders,
                                                     const GuidanceParams& params, int workers = 1);

/// Writes <dir>/<cam>/<%04d>_{depth,normal,edge,object,mask}.png; edge and
/// mask are stored as 0/255.
void write_guidance(const std::filesystem::path& dir, const std::string& camera, std::size_t frame,
                    const GuidanceSet& guidance);

}  // namespace drivedit
