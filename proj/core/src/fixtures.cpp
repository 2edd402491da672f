#include "drivedit/fixtures.hpp"

#include <cmath>
#include <numbers>

#include "drivedit/rasterizer.hpp"

namespace drivedit::fixtures {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Mat4 pose(double yaw, const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  m.topRightCorner<3, 1>() = t;
  return m;
}

// Camera mount: OpenCV camera axes expressed in the ego frame, yawed.
Mat4 camera_mount(double yaw_deg, const Vec3& position) {
  Mat3 base;
  base.col(0) = Vec3(0, -1, 0);  // x right
  base.col(1) = Vec3(0, 0, -1);  // y down
  base.col(2) = Vec3(1, 0, 0);   // z forward
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(yaw_deg * kDeg, Vec3::UnitZ()).toRotationMatrix() * base;
  m.topRightCorner<3, 1>() = position;
  return m;
}

Vec3 ground_color(double x, double y) {
  const long tx = static_cast<long>(std::floor(x / 2.0));
  const long ty = static_cast<long>(std::floor(y / 2.0));
  const bool dark = ((tx + ty) & 1) != 0;
  Vec3 c = dark ? Vec3(0.28, 0.28, 0.30) : Vec3(0.45, 0.45, 0.47);
  // Lane markings at y = +-1.8 m.
  if (std::abs(std::abs(y) - 1.8) < 0.12) c = Vec3(0.92, 0.92, 0.85);
  return c;
}

Vec3 sky_color(double elevation) {
  const double t = std::clamp(elevation / (std::numbers::pi / 2), 0.0, 1.0);
  return Vec3(0.62, 0.74, 0.90) * (1.0 - t) + Vec3(0.30, 0.48, 0.80) * t;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

}  // namespace

Mesh make_box_mesh(const Vec3& lo, const Vec3& hi, const Vec3& color) {
  Mesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
    m.vertex_colors.push_back(color);
  }
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  m.base_color = color;
  return m;
}

Mesh merge_meshes(const Mesh& a, const Mesh& b) {
  Mesh out = a;
  const auto offset = static_cast<std::uint32_t>(a.vertices.size());
  out.vertices.insert(out.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (auto t : b.triangles) out.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
  if (a.has_vertex_colors() && b.has_vertex_colors()) {
    out.vertex_colors.insert(out.vertex_colors.end(), b.vertex_colors.begin(), b.vertex_colors.end());
  } else {
    out.vertex_colors.clear();
  }
  return out;
}

Mesh make_toy_car_mesh() {
  const Mesh body = make_box_mesh(Vec3(-2.1, -0.9, 0.25), Vec3(2.1, 0.9, 1.0), Vec3(0.78, 0.12, 0.10));
  const Mesh cabin = make_box_mesh(Vec3(-1.2, -0.8, 1.0), Vec3(0.9, 0.8, 1.55), Vec3(0.20, 0.24, 0.30));
  const Mesh wheels_f = make_box_mesh(Vec3(1.0, -0.95, 0.0), Vec3(1.7, 0.95, 0.25), Vec3(0.05, 0.05, 0.05));
  const Mesh wheels_r = make_box_mesh(Vec3(-1.7, -0.95, 0.0), Vec3(-1.0, 0.95, 0.25), Vec3(0.05, 0.05, 0.05));
  Mesh car = merge_meshes(merge_meshes(merge_meshes(body, cabin), wheels_f), wheels_r);
  car.base_color = Vec3(0.78, 0.12, 0.10);
  return car;
}

SceneBundle make_demo_scene(const SceneOptions& o) {
  SceneBundle scene;
  scene.meta.scene_id = o.rig == Rig::surround ? "demo-surround" : "demo-stereo";
  scene.meta.num_frames = o.frames;
  scene.meta.fps = o.fps;

  struct Mount {
    const char* name;
    double yaw_deg;
  };
  std::vector<Mount> mounts;
  double hfov_deg = 70.0;
  if (o.rig == Rig::stereo_front) {
    mounts = {{"CAM_FRONT_LEFT", 25.0}, {"CAM_FRONT_RIGHT", -25.0}};
  } else {
    mounts = {{"CAM_FRONT", 0.0},  {"CAM_FRONT_RIGHT", -60.0}, {"CAM_BACK_RIGHT", -120.0},
              {"CAM_BACK", 180.0}, {"CAM_BACK_LEFT", 120.0},   {"CAM_FRONT_LEFT", 60.0}};
    hfov_deg = 75.0;
  }
  const double fx = 0.5 * o.width / std::tan(0.5 * hfov_deg * kDeg);

  for (const Mount& mt : mounts) {
    Camera cam;
    cam.name = mt.name;
    cam.width = o.width;
    cam.height = o.height;
    cam.intrinsics << fx, 0, 0.5 * o.width, 0, fx, 0.5 * o.height, 0, 0, 1;
    const Mat4 mount = camera_mount(mt.yaw_deg, Vec3(1.2 * std::cos(mt.yaw_deg * kDeg), 0.6 * std::sin(mt.yaw_deg * kDeg), 1.5));
    for (std::size_t f = 0; f < o.frames; ++f) {
      const double t = static_cast<double>(f) / o.fps;
      const Mat4 ego = pose(0.01 * static_cast<double>(f), Vec3(o.ego_speed * t, 0.0, 0.0));
      cam.extrinsics.push_back(ego * mount);
    }
    scene.meta.cameras.push_back(cam.name);
    scene.cameras.push_back(std::move(cam));
  }

  BBox3D parked;
  parked.center = Vec3(14.0, 4.5, 0.8);
  parked.size = Vec3(1.9, 4.4, 1.6);
  parked.yaw = 0.05;
  parked.category = Category::car;
  parked.id = "parked_car";
  scene.boxes.assign(o.frames, {});
  if (o.with_parked_car) {
    for (auto& frame_boxes : scene.boxes) frame_boxes.push_back(parked);
  }
  const Mesh parked_mesh = make_box_mesh(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5), Vec3(0.35, 0.45, 0.60));
  const AssetTransform parked_tf = fit_mesh_to_box(parked_mesh, parked);

  for (const Camera& cam : scene.cameras) {
    std::vector<ImageU8> images;
    std::vector<DepthMap> depths;
    for (std::size_t f = 0; f < o.frames; ++f) {
      ImageU8 img(o.width, o.height, 3, 0);
      DepthMap depth(o.width, o.height, 1, 0.0);
      const Mat4& c2w = cam.extrinsics[f];
      const Mat3 r = c2w.topLeftCorner<3, 3>();
      const Vec3 origin = c2w.topRightCorner<3, 1>();
      for (int y = 0; y < o.height; ++y) {
        for (int x = 0; x < o.width; ++x) {
          const Vec3 d_cam((x + 0.5 - cam.cx()) / cam.fx(), (y + 0.5 - cam.cy()) / cam.fy(), 1.0);
          const Vec3 d = r * d_cam;
          Vec3 color;
          if (d.z() < 0.0) {
            const double s = -origin.z() / d.z();
            const Vec3 hit = origin + s * d;
            // Fade distant ground toward the horizon haze.
            const double haze = std::clamp((s - 40.0) / 80.0, 0.0, 1.0);
            color = ground_color(hit.x(), hit.y()) * (1.0 - haze) + Vec3(0.6, 0.66, 0.72) * haze;
            depth.at(x, y) = s;
          } else {
            color = sky_color(std::atan2(d.z(), d.head<2>().norm()));
          }
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = to_byte(color[c]);
        }
      }
      if (o.with_parked_car) {
        const ObjectRender r = render_asset(parked_mesh, parked_tf, cam, f);
        for (int y = 0; y < o.height; ++y) {
          for (int x = 0; x < o.width; ++x) {
            if (!r.mask.at(x, y)) continue;
            const double z = depth.at(x, y);
            if (z > 0.0 && z <= r.depth.at(x, y)) continue;
            depth.at(x, y) = r.depth.at(x, y);
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = r.color.at(x, y, c);
          }
        }
      }
      images.push_back(std::move(img));
      depths.push_back(std::move(depth));
    }
    scene.frames.push_back(std::move(images));
    scene.depth.push_back(o.with_depth ? std::move(depths) : std::vector<DepthMap>{});
  }
  scene.validate();
  return scene;
}

}  // namespace drivedit::fixtures
