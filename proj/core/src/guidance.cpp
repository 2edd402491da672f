#include "drivedit/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "drivedit/parallel.hpp"
#include "drivedit/png_io.hpp"

namespace drivedit {
namespace {

bool valid_depth(double z) { return std::isfinite(z) && z > 0.0; }

std::uint8_t encode_unit(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround((v + 1.0) * 0.5 * 255.0), 0L, 255L));
}

constexpr int kGauss[5][5] = {
    {2, 4, 5, 4, 2}, {4, 9, 12, 9, 4}, {5, 12, 15, 12, 5}, {4, 9, 12, 9, 4}, {2, 4, 5, 4, 2}};
constexpr double kGaussNorm = 159.0;

ImageU8 to_visible(const Mask& m) {
  ImageU8 img(m.width(), m.height(), 1, 0);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) img.at(x, y) = m.at(x, y) ? 255 : 0;
  return img;
}

}  // namespace

ImageU8 normalize_depth(const DepthMap& depth, const Mask& valid) {
  if (!depth.same_shape(valid)) throw InputError("normalize_depth: shape mismatch");
  ImageU8 out(depth.width(), depth.height(), 1, kNullDepth);
  double qmin = std::numeric_limits<double>::infinity();
  double qmax = -qmin;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!valid.at(x, y)) continue;
      const double q = 1.0 / depth.at(x, y);
      qmin = std::min(qmin, q);
      qmax = std::max(qmax, q);
    }
  }
  if (!(qmax >= qmin)) return out;
  const double range = qmax - qmin;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!valid.at(x, y)) continue;
      if (range <= 0.0) {
        out.at(x, y) = 255;
        continue;
      }
      const double q = 1.0 / depth.at(x, y);
      const long v = std::lround(1.0 + (q - qmin) / range * 254.0);
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 1L, 255L));
    }
  }
  return out;
}

ImageU8 normalize_depth(const DepthMap& depth) {
  Mask valid(depth.width(), depth.height(), 1, 0);
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) valid.at(x, y) = valid_depth(depth.at(x, y)) ? 1 : 0;
  return normalize_depth(depth, valid);
}

ImageU8 depth_to_normal(const DepthMap& depth, const Mat3& k) {
  const int w = depth.width();
  const int h = depth.height();
  ImageU8 out(w, h, 3, kNullNormal);
  const double fx = k(0, 0), fy = k(1, 1), cx = k(0, 2), cy = k(1, 2);
  auto point = [&](int x, int y) {
    const double z = depth.at(x, y);
    return Vec3((x + 0.5 - cx) / fx * z, (y + 0.5 - cy) / fy * z, z);
  };
  auto ok = [&](int x, int y) { return depth.contains(x, y) ? valid_depth(depth.at(x, y)) : true; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid_depth(depth.at(x, y)) || !ok(x - 1, y) || !ok(x + 1, y) || !ok(x, y - 1) || !ok(x, y + 1)) {
        continue;
      }
      if (w < 2 || h < 2) continue;
      const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
      const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
      const Vec3 tu = (point(xr, y) - point(xl, y)) / static_cast<double>(xr - xl);
      const Vec3 tv = (point(x, yd) - point(x, yu)) / static_cast<double>(yd - yu);
      Vec3 n = tu.cross(tv);
      const double len = n.norm();
      if (!(len > 0.0) || !std::isfinite(len)) continue;
      n /= len;
      // Face the camera; n_z alone is ambiguous for surfaces parallel to the optical axis.
      if (n.dot(point(x, y)) > 0.0) n = -n;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = encode_unit(n[c]);
    }
  }
  return out;
}

Mask canny_edges(const ImageU8& gray, double low, double high) {
  if (gray.channels() != 1) throw InputError("canny_edges: expected a single-channel image");
  if (low > high) throw InputError("canny_edges: low threshold exceeds high threshold");
  const int w = gray.width();
  const int h = gray.height();
  auto cx = [&](int x) { return std::clamp(x, 0, w - 1); };
  auto cy = [&](int y) { return std::clamp(y, 0, h - 1); };

  // Integer 5x5 sum: blur holds 159x the smoothed image, so every gradient
  // below is exact and ties in NMS are resolved identically everywhere.
  std::vector<std::int64_t> blur(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t s = 0;
      for (int j = -2; j <= 2; ++j)
        for (int i = -2; i <= 2; ++i) s += kGauss[j + 2][i + 2] * gray.at(cx(x + i), cy(y + j));
      blur[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  auto b = [&](int x, int y) { return blur[static_cast<std::size_t>(cy(y)) * w + cx(x)]; };

  std::vector<double> mag(static_cast<std::size_t>(w) * h);
  std::vector<std::uint8_t> dir(mag.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int64_t gx = (b(x + 1, y - 1) + 2 * b(x + 1, y) + b(x + 1, y + 1)) -
                              (b(x - 1, y - 1) + 2 * b(x - 1, y) + b(x - 1, y + 1));
      const std::int64_t gy = (b(x - 1, y + 1) + 2 * b(x, y + 1) + b(x + 1, y + 1)) -
                              (b(x - 1, y - 1) + 2 * b(x, y - 1) + b(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      // Exact integer square sum, then one correctly rounded sqrt: equal sums give equal magnitudes.
      mag[i] = std::sqrt(static_cast<double>(gx * gx + gy * gy)) / kGaussNorm;
      double deg = std::atan2(static_cast<double>(gy), static_cast<double>(gx)) * 180.0 / std::numbers::pi;
      if (deg < 0.0) deg += 180.0;
      if (deg < 22.5 || deg >= 157.5) dir[i] = 0;
      else if (deg < 67.5) dir[i] = 1;
      else if (deg < 112.5) dir[i] = 2;
      else dir[i] = 3;
    }
  }

  // Backward neighbour offsets per direction bin; forward is the negation.
  constexpr int kDx[4] = {-1, -1, 0, 1};
  constexpr int kDy[4] = {0, -1, -1, -1};
  auto m_at = [&](int x, int y) {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : mag[static_cast<std::size_t>(y) * w + x];
  };
  std::vector<std::uint8_t> state(mag.size(), 0);  // 0 none, 1 weak, 2 strong
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double m = mag[i];
      if (!(m > low)) continue;
      const int d = dir[i];
      if (!(m > m_at(x + kDx[d], y + kDy[d]) && m >= m_at(x - kDx[d], y - kDy[d]))) continue;
      if (m > high) {
        state[i] = 2;
        stack.emplace_back(x, y);
      } else {
        state[i] = 1;
      }
    }
  }
  Mask out(w, h, 1, 0);
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    out.at(x, y) = 1;
    for (int j = -1; j <= 1; ++j) {
      for (int i = -1; i <= 1; ++i) {
        const int nx = x + i, ny = y + j;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t k = static_cast<std::size_t>(ny) * w + nx;
        if (state[k] == 1) {
          state[k] = 2;
          stack.emplace_back(nx, ny);
        }
      }
    }
  }
  return out;
}

GuidanceSet mask_foreground(GuidanceSet g, int dilation_radius) {
  const Mask region = dilate(g.mask, dilation_radius);
  for (int y = 0; y < region.height(); ++y) {
    for (int x = 0; x < region.width(); ++x) {
      if (!region.at(x, y)) continue;
      g.depth.at(x, y) = kNullDepth;
      g.edge.at(x, y) = kNullEdge;
      for (int c = 0; c < 3; ++c) g.normal.at(x, y, c) = kNullNormal;
    }
  }
  return g;
}

DepthMap flat_ground_depth(const Camera& camera, std::size_t frame) {
  DepthMap out(camera.width, camera.height, 1, 0.0);
  const Mat4& c2w = camera.extrinsics.at(frame);
  const Mat3 r = c2w.topLeftCorner<3, 3>();
  const Vec3 origin = c2w.topRightCorner<3, 1>();
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Vec3 d_cam((x + 0.5 - camera.cx()) / camera.fx(), (y + 0.5 - camera.cy()) / camera.fy(), 1.0);
      const Vec3 d = r * d_cam;
      if (!(d.z() < 0.0)) continue;
      const double s = -origin.z() / d.z();  // camera depth, since d_cam.z = 1
      if (s > 0.0 && std::isfinite(s)) out.at(x, y) = s;
    }
  }
  return out;
}

GuidanceSet build_guidance_view(const ImageU8& frame, const DepthMap& depth, const Mat3& intrinsics,
                                const ObjectRender& render, const GuidanceParams& params) {
  if (!frame.same_shape(depth) || !frame.same_shape(render.mask)) {
    throw InputError("build_guidance: frame, depth and render shapes differ");
  }
  GuidanceSet g;
  g.depth = normalize_depth(depth);
  g.normal = depth_to_normal(depth, intrinsics);
  g.edge = canny_edges(to_grayscale(frame), params.canny_low, params.canny_high);
  g.object = render.color;
  g.mask = render.mask;
  return mask_foreground(std::move(g), params.dilation);
}

std::vector<std::vector<GuidanceSet>> build_guidance(const SceneBundle& scene,
                                                     const std::vector<std::vector<ObjectRender>>& renders,
                                                     const GuidanceParams& params, int workers) {
  const std::size_t nc = scene.cameras.size();
  const std::size_t nf = scene.frame_count();
  if (renders.size() != nc) throw InputError("build_guidance: one render list per camera required");
  for (std::size_t c = 0; c < nc; ++c) {
    if (renders[c].size() != nf) throw InputError("build_guidance: one render per frame required");
    if (!scene.has_depth(c) && !params.flat_ground_fallback) {
      throw InputError(fmt::format("build_guidance: camera '{}' has no scene depth and the flat-ground "
                                   "fallback is disabled",
                                   scene.cameras[c].name));
    }
  }
  std::vector<std::vector<GuidanceSet>> out(nc, std::vector<GuidanceSet>(nf));
  parallel_for(nc * nf, workers, [&](std::size_t job) {
    const std::size_t c = job / nf;
    const std::size_t f = job % nf;
    const Camera& cam = scene.cameras[c];
    const DepthMap depth = scene.has_depth(c) ? scene.depth[c][f] : flat_ground_depth(cam, f);
    out[c][f] = build_guidance_view(scene.frames[c][f], depth, cam.intrinsics, renders[c][f], params);
  });
  return out;
}

void write_guidance(const std::filesystem::path& dir, const std::string& camera, std::size_t frame,
                    const GuidanceSet& g) {
  const auto cam_dir = dir / camera;
  std::filesystem::create_directories(cam_dir);
  const std::string stem = frame_stem(frame);
  png::write(cam_dir / (stem + "_depth.png"), g.depth);
  png::write(cam_dir / (stem + "_normal.png"), g.normal);
  png::write(cam_dir / (stem + "_edge.png"), to_visible(g.edge));
  png::write(cam_dir / (stem + "_object.png"), g.object);
  png::write(cam_dir / (stem + "_mask.png"), to_visible(g.mask));
}

}  // namespace drivedit
