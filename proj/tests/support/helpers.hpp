#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "drivedit/scene_model.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "drivedit") {
    std::random_device rd;
    path_ = fs::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

inline void write_bytes(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << s;
}

/// Relative path -> file contents for every regular file under `root`.
inline std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_bytes(e.path());
  }
  return out;
}

inline drivedit::Mat4 random_rigid(std::mt19937_64& rng, double translation = 20.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-translation, translation);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  drivedit::Mat4 m = drivedit::Mat4::Identity();
  m.topLeftCorner<3, 3>() = q.toRotationMatrix();
  m.topRightCorner<3, 1>() = drivedit::Vec3(u(rng), u(rng), u(rng));
  return m;
}

inline drivedit::Camera simple_camera(int width, int height, double f, std::size_t frames = 1,
                                      const drivedit::Mat4& c2w = drivedit::Mat4::Identity()) {
  drivedit::Camera cam;
  cam.name = "CAM";
  cam.width = width;
  cam.height = height;
  cam.intrinsics << f, 0, width / 2.0, 0, f, height / 2.0, 0, 0, 1;
  cam.extrinsics.assign(frames, c2w);
  return cam;
}

}  // namespace testing_support
