#pragma once

// Scene bundle data model and calibration math.
//
// Conventions:
//   world  right-handed, z up; the world frame is the ego pose of frame 0.
//   camera OpenCV style: x right, y down, z forward.
//   ego    x forward, y left, z up.
// Camera extrinsics are stored camera-to-world and inverted for projection.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "drivedit/image.hpp"

namespace drivedit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kRotationTolerance = 1e-6;

enum class Category {
  car,
  truck,
  bus,
  trailer,
  construction_vehicle,
  pedestrian,
  motorcycle,
  bicycle,
  traffic_cone,
  barrier,
};
inline constexpr std::array<Category, 10> kAllCategories = {
    Category::car,        Category::truck,      Category::bus,     Category::trailer,
    Category::construction_vehicle, Category::pedestrian, Category::motorcycle,
    Category::bicycle,    Category::traffic_cone, Category::barrier};

std::string_view to_string(Category c);
/// Throws InputError on unknown names.
Category parse_category(std::string_view name);

/// Returns an empty string when `m` is a proper rotation (orthonormal, det = +1
/// within kRotationTolerance), otherwise a short reason.
std::string rotation_problem(const Mat3& m);
bool is_rigid(const Mat4& m);
/// Inverse of a rigid transform (R^T, -R^T t).
Mat4 rigid_inverse(const Mat4& m);
/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

struct Camera {
  std::string name;
  Mat3 intrinsics = Mat3::Identity();
  std::vector<Mat4> extrinsics;  ///< camera-to-world, one per frame
  int width = 0;
  int height = 0;

  double fx() const { return intrinsics(0, 0); }
  double fy() const { return intrinsics(1, 1); }
  double cx() const { return intrinsics(0, 2); }
  double cy() const { return intrinsics(1, 2); }
  std::size_t frame_count() const { return extrinsics.size(); }
  Mat4 world_to_camera(std::size_t frame) const;

  /// Checks every Camera invariant; throws InputError naming `context` and the field.
  void validate(std::string_view context) const;
};

struct BBox3D {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();  ///< (w, l, h); l runs along the heading (local x)
  double yaw = 0.0;          ///< about world z, (-pi, pi]
  Category category = Category::car;
  std::string id;

  double width() const { return size.x(); }
  double length() const { return size.y(); }
  double height() const { return size.z(); }
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;  ///< camera-space depth, meters
};

/// Pinhole projection; std::nullopt marks points with z_cam <= 0.
std::optional<Projection> project_point(const Camera& camera, std::size_t frame, const Vec3& p_world);
/// Back-projects pixel (u, v) at camera depth z into the world frame.
Vec3 unproject(const Camera& camera, std::size_t frame, double u, double v, double z);

/// Corners of the oriented box: bottom face counter-clockwise seen from +z,
/// starting at front-right (+l/2, -w/2), then the top face in the same order.
std::array<Vec3, 8> box_corners(const BBox3D& box);

/// Re-expresses a world box in the ego frame of `ego_pose` (ego-to-world).
BBox3D world_to_ego(const BBox3D& box, const Mat4& ego_pose);

struct SceneMeta {
  std::string scene_id;
  std::size_t num_frames = 0;
  double fps = 10.0;
  std::vector<std::string> cameras;
};

struct SceneBundle {
  SceneMeta meta;
  std::vector<Camera> cameras;
  std::vector<std::vector<ImageU8>> frames;     ///< [camera][frame], RGB
  std::vector<std::vector<BBox3D>> boxes;       ///< [frame]
  std::vector<std::vector<DepthMap>> depth;     ///< [camera][frame]; inner empty = no depth for camera

  std::size_t frame_count() const { return meta.num_frames; }
  bool has_depth(std::size_t camera) const {
    return camera < depth.size() && !depth[camera].empty();
  }
  /// Index of the named camera; throws InputError if absent.
  std::size_t camera_index(std::string_view name) const;
  /// Checks all bundle invariants (shared T, shared (H, W), box frame ranges).
  void validate() const;
};

SceneBundle load_scene_bundle(const std::filesystem::path& dir);
/// Writes the bundle in the on-disk layout read by load_scene_bundle.
void save_scene_bundle(const SceneBundle& scene, const std::filesystem::path& dir);

/// JSON codec for boxes.json records.
nlohmann::ordered_json box_to_json(const BBox3D& box);
BBox3D box_from_json(const nlohmann::json& j, std::string_view context);
nlohmann::ordered_json boxes_to_json(const std::vector<std::vector<BBox3D>>& frames);

/// 16-bit millimetre depth <-> metric depth (0 = unknown, stored as 0.0).
DepthMap depth_from_millimeters(const ImageU16& mm);
ImageU16 depth_to_millimeters(const DepthMap& depth);

/// "%04d" frame file stem.
std::string frame_stem(std::size_t frame);

}  // namespace drivedit
