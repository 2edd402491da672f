#include "drivedit/scene_model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "drivedit/png_io.hpp"

namespace drivedit {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 10> kCategoryNames = {
    "car",        "truck",      "bus",     "trailer",      "construction_vehicle",
    "pedestrian", "motorcycle", "bicycle", "traffic_cone", "barrier"};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("{}: missing file", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("{}: cannot write", path.string()));
  out << j.dump(2) << '\n';
}

template <typename T>
T field(const json& j, const char* key, std::string_view context) {
  if (!j.is_object() || !j.contains(key)) {
    throw InputError(fmt::format("{}: missing field '{}'", context, key));
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(fmt::format("{}: field '{}' has the wrong type", context, key));
  }
}

template <int R, int C>
Eigen::Matrix<double, R, C> matrix_from_json(const json& j, std::string_view context) {
  Eigen::Matrix<double, R, C> m;
  if (!j.is_array() || j.size() != R) {
    throw InputError(fmt::format("{}: expected a {}x{} row-major matrix", context, R, C));
  }
  for (int r = 0; r < R; ++r) {
    if (!j[r].is_array() || j[r].size() != C) {
      throw InputError(fmt::format("{}: expected a {}x{} row-major matrix", context, R, C));
    }
    for (int c = 0; c < C; ++c) {
      if (!j[r][c].is_number()) throw InputError(fmt::format("{}: non-numeric entry", context));
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

template <typename Derived>
nlohmann::ordered_json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Vec3 vec3_from_json(const json& j, std::string_view context) {
  if (!j.is_array() || j.size() != 3) throw InputError(fmt::format("{}: expected 3-vector", context));
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw InputError(fmt::format("{}: non-numeric entry", context));
    v[i] = j[i].get<double>();
  }
  return v;
}

}  // namespace

std::string_view to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

Category parse_category(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<Category>(i);
  }
  throw InputError(fmt::format("unknown category '{}'", name));
}

std::string rotation_problem(const Mat3& m) {
  if (!m.allFinite()) return "non-finite rotation";
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kRotationTolerance) return "invalid rotation (not orthonormal)";
  if (std::abs(m.determinant() - 1.0) > kRotationTolerance) return "invalid rotation (det != +1)";
  return {};
}

bool is_rigid(const Mat4& m) {
  if (!m.allFinite()) return false;
  if (!rotation_problem(m.topLeftCorner<3, 3>()).empty()) return false;
  return std::abs(m(3, 0)) + std::abs(m(3, 1)) + std::abs(m(3, 2)) + std::abs(m(3, 3) - 1.0) <
         kRotationTolerance;
}

Mat4 rigid_inverse(const Mat4& m) {
  Mat4 inv = Mat4::Identity();
  const Mat3 rt = m.topLeftCorner<3, 3>().transpose();
  inv.topLeftCorner<3, 3>() = rt;
  inv.topRightCorner<3, 1>() = -rt * m.topRightCorner<3, 1>();
  return inv;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Mat4 Camera::world_to_camera(std::size_t frame) const { return rigid_inverse(extrinsics.at(frame)); }

void Camera::validate(std::string_view context) const {
  if (!(fx() > 0.0) || !(fy() > 0.0)) {
    throw InputError(fmt::format("{}: intrinsics: fx and fy must be positive", context));
  }
  if (!(cx() > 0.0 && cx() < width) || !(cy() > 0.0 && cy() < height)) {
    throw InputError(fmt::format("{}: intrinsics: principal point outside the image", context));
  }
  if (width <= 0 || height <= 0) throw InputError(fmt::format("{}: width/height must be positive", context));
  for (std::size_t i = 0; i < extrinsics.size(); ++i) {
    const std::string problem = rotation_problem(extrinsics[i].topLeftCorner<3, 3>());
    if (!problem.empty()) throw InputError(fmt::format("{}: extrinsics[{}]: {}", context, i, problem));
    if (!is_rigid(extrinsics[i])) {
      throw InputError(fmt::format("{}: extrinsics[{}]: bottom row must be (0, 0, 0, 1)", context, i));
    }
  }
}

std::optional<Projection> project_point(const Camera& camera, std::size_t frame, const Vec3& p_world) {
  const Mat4& c2w = camera.extrinsics.at(frame);
  const Mat3 r = c2w.topLeftCorner<3, 3>();
  const Vec3 p = r.transpose() * (p_world - c2w.topRightCorner<3, 1>());
  if (!(p.z() > 0.0)) return std::nullopt;
  return Projection{camera.fx() * p.x() / p.z() + camera.cx(), camera.fy() * p.y() / p.z() + camera.cy(),
                    p.z()};
}

Vec3 unproject(const Camera& camera, std::size_t frame, double u, double v, double z) {
  const Vec3 p_cam((u - camera.cx()) / camera.fx() * z, (v - camera.cy()) / camera.fy() * z, z);
  const Mat4& c2w = camera.extrinsics.at(frame);
  return c2w.topLeftCorner<3, 3>() * p_cam + c2w.topRightCorner<3, 1>();
}

std::array<Vec3, 8> box_corners(const BBox3D& box) {
  const double hl = 0.5 * box.length();
  const double hw = 0.5 * box.width();
  const double hh = 0.5 * box.height();
  const std::array<Vec2, 4> footprint = {Vec2(hl, -hw), Vec2(hl, hw), Vec2(-hl, hw), Vec2(-hl, -hw)};
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  std::array<Vec3, 8> out;
  for (int i = 0; i < 4; ++i) {
    const Vec2& f = footprint[i];
    const Vec3 offset(c * f.x() - s * f.y(), s * f.x() + c * f.y(), 0.0);
    out[i] = box.center + offset - Vec3(0, 0, hh);
    out[i + 4] = box.center + offset + Vec3(0, 0, hh);
  }
  return out;
}

BBox3D world_to_ego(const BBox3D& box, const Mat4& ego_pose) {
  if (!is_rigid(ego_pose)) throw InputError("world_to_ego: ego pose is not a rigid transform");
  const Mat3 r = ego_pose.topLeftCorner<3, 3>();
  BBox3D out = box;
  out.center = r.transpose() * (box.center - ego_pose.topRightCorner<3, 1>());
  const double ego_yaw = std::atan2(r(1, 0), r(0, 0));
  out.yaw = wrap_angle(box.yaw - ego_yaw);
  return out;
}

std::size_t SceneBundle::camera_index(std::string_view name) const {
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    if (cameras[i].name == name) return i;
  }
  throw InputError(fmt::format("unknown camera '{}'", name));
}

void SceneBundle::validate() const {
  const std::size_t t = meta.num_frames;
  if (t == 0) throw InputError("meta.json: num_frames must be positive");
  if (cameras.empty()) throw InputError("meta.json: no cameras");
  if (frames.size() != cameras.size()) throw InputError("scene: frame list does not match camera list");
  if (boxes.size() != t) throw InputError("boxes.json: frames length mismatch");
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const Camera& cam = cameras[c];
    const std::string ctx = fmt::format("cameras/{}.json", cam.name);
    if (cam.extrinsics.size() != t) {
      throw InputError(fmt::format("{}: extrinsics length mismatch ({} vs {} frames)", ctx,
                                   cam.extrinsics.size(), t));
    }
    cam.validate(ctx);
    if (frames[c].size() != t) throw InputError(fmt::format("frames/{}: frame count mismatch", cam.name));
    for (std::size_t f = 0; f < t; ++f) {
      if (!frames[c][f].same_shape(cam.width, cam.height) || frames[c][f].channels() != 3) {
        throw InputError(fmt::format("frames/{}/{}.png: image-dimension mismatch", cam.name, frame_stem(f)));
      }
    }
    if (has_depth(c)) {
      if (depth[c].size() != t) throw InputError(fmt::format("depth/{}: frame count mismatch", cam.name));
      for (std::size_t f = 0; f < t; ++f) {
        if (!depth[c][f].same_shape(cam.width, cam.height)) {
          throw InputError(fmt::format("depth/{}/{}.png: image-dimension mismatch", cam.name, frame_stem(f)));
        }
      }
    }
  }
  for (std::size_t f = 0; f < t; ++f) {
    for (const BBox3D& b : boxes[f]) {
      if (!(b.size.array() > 0.0).all()) {
        throw InputError(fmt::format("boxes.json: frames[{}] box '{}': size must be positive", f, b.id));
      }
      if (!(b.yaw > -std::numbers::pi && b.yaw <= std::numbers::pi)) {
        throw InputError(fmt::format("boxes.json: frames[{}] box '{}': yaw outside (-pi, pi]", f, b.id));
      }
    }
  }
}

nlohmann::ordered_json box_to_json(const BBox3D& box) {
  nlohmann::ordered_json j;
  j["id"] = box.id;
  j["category"] = std::string(to_string(box.category));
  j["center"] = {box.center.x(), box.center.y(), box.center.z()};
  j["size"] = {box.size.x(), box.size.y(), box.size.z()};
  j["yaw"] = box.yaw;
  return j;
}

BBox3D box_from_json(const json& j, std::string_view context) {
  BBox3D b;
  b.id = field<std::string>(j, "id", context);
  b.category = parse_category(field<std::string>(j, "category", context));
  if (!j.contains("center") || !j.contains("size")) {
    throw InputError(fmt::format("{}: missing center/size", context));
  }
  b.center = vec3_from_json(j.at("center"), fmt::format("{}.center", context));
  b.size = vec3_from_json(j.at("size"), fmt::format("{}.size", context));
  b.yaw = field<double>(j, "yaw", context);
  return b;
}

nlohmann::ordered_json boxes_to_json(const std::vector<std::vector<BBox3D>>& frames) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& frame : frames) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& b : frame) list.push_back(box_to_json(b));
    arr.push_back(list);
  }
  nlohmann::ordered_json root;
  root["frames"] = arr;
  return root;
}

DepthMap depth_from_millimeters(const ImageU16& mm) {
  DepthMap d(mm.width(), mm.height(), 1, 0.0);
  for (int y = 0; y < mm.height(); ++y) {
    for (int x = 0; x < mm.width(); ++x) d.at(x, y) = mm.at(x, y) * 1e-3;
  }
  return d;
}

ImageU16 depth_to_millimeters(const DepthMap& depth) {
  ImageU16 mm(depth.width(), depth.height(), 1, 0);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double z = depth.at(x, y);
      if (!std::isfinite(z) || z <= 0.0) continue;
      const long v = std::lround(z * 1000.0);
      if (v > 0 && v <= 65535) mm.at(x, y) = static_cast<std::uint16_t>(v);
    }
  }
  return mm;
}

std::string frame_stem(std::size_t frame) { return fmt::format("{:04d}", frame); }

SceneBundle load_scene_bundle(const fs::path& dir) {
  SceneBundle scene;
  const fs::path meta_path = dir / "meta.json";
  const json meta = read_json(meta_path);
  const std::string mctx = meta_path.string();
  scene.meta.scene_id = field<std::string>(meta, "scene_id", mctx);
  const auto num_frames = field<long long>(meta, "num_frames", mctx);
  if (num_frames <= 0) throw InputError(fmt::format("{}: num_frames must be positive", mctx));
  scene.meta.num_frames = static_cast<std::size_t>(num_frames);
  scene.meta.fps = field<double>(meta, "fps", mctx);
  if (!(scene.meta.fps > 0.0)) throw InputError(fmt::format("{}: fps must be positive", mctx));
  scene.meta.cameras = field<std::vector<std::string>>(meta, "cameras", mctx);
  const std::size_t t = scene.meta.num_frames;

  for (const std::string& name : scene.meta.cameras) {
    const fs::path cam_path = dir / "cameras" / (name + ".json");
    const std::string ctx = cam_path.string();
    const json cj = read_json(cam_path);
    Camera cam;
    cam.name = name;
    if (!cj.contains("intrinsics")) throw InputError(fmt::format("{}: missing field 'intrinsics'", ctx));
    cam.intrinsics = matrix_from_json<3, 3>(cj.at("intrinsics"), ctx + ": intrinsics");
    cam.width = field<int>(cj, "width", ctx);
    cam.height = field<int>(cj, "height", ctx);
    if (!cj.contains("extrinsics") || !cj.at("extrinsics").is_array()) {
      throw InputError(fmt::format("{}: missing field 'extrinsics'", ctx));
    }
    const json& ext = cj.at("extrinsics");
    if (ext.size() != t) {
      throw InputError(fmt::format("{}: extrinsics length mismatch ({} vs {} frames)", ctx, ext.size(), t));
    }
    for (std::size_t f = 0; f < ext.size(); ++f) {
      cam.extrinsics.push_back(matrix_from_json<4, 4>(ext[f], fmt::format("{}: extrinsics[{}]", ctx, f)));
    }
    cam.validate(ctx);

    std::vector<ImageU8> images;
    std::vector<DepthMap> depths;
    const fs::path depth_dir = dir / "depth" / name;
    const bool has_depth = fs::is_directory(depth_dir);
    for (std::size_t f = 0; f < t; ++f) {
      const fs::path img_path = dir / "frames" / name / (frame_stem(f) + ".png");
      if (!fs::exists(img_path)) throw InputError(fmt::format("{}: missing file", img_path.string()));
      ImageU8 img = png::read_u8(img_path, 3);
      if (!img.same_shape(cam.width, cam.height)) {
        throw InputError(fmt::format("{}: image-dimension mismatch ({}x{} vs camera {}x{})", img_path.string(),
                                     img.width(), img.height(), cam.width, cam.height));
      }
      images.push_back(std::move(img));
      if (has_depth) {
        const fs::path dpath = depth_dir / (frame_stem(f) + ".png");
        if (!fs::exists(dpath)) throw InputError(fmt::format("{}: missing file", dpath.string()));
        DepthMap d = depth_from_millimeters(png::read_u16(dpath));
        if (!d.same_shape(cam.width, cam.height)) {
          throw InputError(fmt::format("{}: image-dimension mismatch", dpath.string()));
        }
        depths.push_back(std::move(d));
      }
    }
    scene.cameras.push_back(std::move(cam));
    scene.frames.push_back(std::move(images));
    scene.depth.push_back(std::move(depths));
  }

  const fs::path boxes_path = dir / "boxes.json";
  const json bj = read_json(boxes_path);
  if (!bj.contains("frames") || !bj.at("frames").is_array()) {
    throw InputError(fmt::format("{}: missing field 'frames'", boxes_path.string()));
  }
  const json& bframes = bj.at("frames");
  if (bframes.size() != t) {
    throw InputError(fmt::format("{}: frames length mismatch ({} vs {})", boxes_path.string(), bframes.size(), t));
  }
  for (std::size_t f = 0; f < t; ++f) {
    std::vector<BBox3D> list;
    for (std::size_t i = 0; i < bframes[f].size(); ++i) {
      list.push_back(box_from_json(bframes[f][i], fmt::format("{}: frames[{}][{}]", boxes_path.string(), f, i)));
    }
    scene.boxes.push_back(std::move(list));
  }
  scene.validate();
  return scene;
}

void save_scene_bundle(const SceneBundle& scene, const fs::path& dir) {
  scene.validate();
  fs::create_directories(dir / "cameras");
  nlohmann::ordered_json meta;
  meta["scene_id"] = scene.meta.scene_id;
  meta["num_frames"] = scene.meta.num_frames;
  meta["fps"] = scene.meta.fps;
  meta["cameras"] = scene.meta.cameras;
  write_json(dir / "meta.json", meta);
  for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
    const Camera& cam = scene.cameras[c];
    nlohmann::ordered_json cj;
    cj["intrinsics"] = matrix_to_json(cam.intrinsics);
    cj["width"] = cam.width;
    cj["height"] = cam.height;
    nlohmann::ordered_json ext = nlohmann::ordered_json::array();
    for (const Mat4& e : cam.extrinsics) ext.push_back(matrix_to_json(e));
    cj["extrinsics"] = ext;
    write_json(dir / "cameras" / (cam.name + ".json"), cj);
    fs::create_directories(dir / "frames" / cam.name);
    for (std::size_t f = 0; f < scene.frame_count(); ++f) {
      png::write(dir / "frames" / cam.name / (frame_stem(f) + ".png"), scene.frames[c][f]);
    }
    if (scene.has_depth(c)) {
      fs::create_directories(dir / "depth" / cam.name);
      for (std::size_t f = 0; f < scene.frame_count(); ++f) {
        png::write(dir / "depth" / cam.name / (frame_stem(f) + ".png"), depth_to_millimeters(scene.depth[c][f]));
      }
    }
  }
  write_json(dir / "boxes.json", boxes_to_json(scene.boxes));
}

}  // namespace drivedit
