#include "drivedit/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drivedit/parallel.hpp"

namespace drivedit {
namespace {

struct ClipVertex {
  Vec3 cam;     // camera-space position
  Vec3 albedo;
};

struct ScreenVertex {
  double x = 0.0;
  double y = 0.0;
  double inv_z = 0.0;
  Vec3 albedo_over_z;
};

struct ScreenTriangle {
  std::array<ScreenVertex, 3> v;
  double area = 0.0;
  double shade = 1.0;  // Lambert factor, already clamped
  std::uint32_t index = 0;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds
};

double snap(double v) { return std::round(v * kSubpixelSteps) / kSubpixelSteps; }

double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

bool is_top_left(const ScreenVertex& from, const ScreenVertex& to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

// Sutherland-Hodgman against the single plane z = near.
std::vector<ClipVertex> clip_near(const std::array<ClipVertex, 3>& tri) {
  std::vector<ClipVertex> out;
  out.reserve(4);
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = tri[i];
    const ClipVertex& b = tri[(i + 1) % 3];
    const bool a_in = a.cam.z() >= kNearPlane;
    const bool b_in = b.cam.z() >= kNearPlane;
    if (a_in) out.push_back(a);
    if (a_in != b_in) {
      const double t = (kNearPlane - a.cam.z()) / (b.cam.z() - a.cam.z());
      ClipVertex m{a.cam + t * (b.cam - a.cam), a.albedo + t * (b.albedo - a.albedo)};
      m.cam.z() = kNearPlane;
      out.push_back(m);
    }
  }
  return out;
}

void raster_rows(const std::vector<ScreenTriangle>& tris, int row_begin, int row_end, ObjectRender& out,
                 std::vector<std::int64_t>& owner) {
  const int w = out.mask.width();
  for (const ScreenTriangle& t : tris) {
    const int ys = std::max(t.y0, row_begin);
    const int ye = std::min(t.y1, row_end - 1);
    if (ys > ye) continue;
    const ScreenVertex& a = t.v[0];
    const ScreenVertex& b = t.v[1];
    const ScreenVertex& c = t.v[2];
    const bool tl0 = is_top_left(b, c);
    const bool tl1 = is_top_left(c, a);
    const bool tl2 = is_top_left(a, b);
    for (int y = ys; y <= ye; ++y) {
      const double py = y + 0.5;
      for (int x = t.x0; x <= t.x1; ++x) {
        const double px = x + 0.5;
        const double w0 = edge(b.x, b.y, c.x, c.y, px, py);
        const double w1 = edge(c.x, c.y, a.x, a.y, px, py);
        const double w2 = edge(a.x, a.y, b.x, b.y, px, py);
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        if ((w0 == 0.0 && !tl0) || (w1 == 0.0 && !tl1) || (w2 == 0.0 && !tl2)) continue;
        const double l0 = w0 / t.area;
        const double l1 = w1 / t.area;
        const double l2 = w2 / t.area;
        const double inv_z = l0 * a.inv_z + l1 * b.inv_z + l2 * c.inv_z;
        if (!(inv_z > 0.0)) continue;
        const double z = 1.0 / inv_z;
        double& zbuf = out.depth.at(x, y);
        const std::size_t pix = static_cast<std::size_t>(y) * w + x;
        const bool nearer = z < zbuf - kDepthTieTolerance;
        const bool tie = !nearer && std::abs(z - zbuf) <= kDepthTieTolerance && owner[pix] >= 0 &&
                         t.index < static_cast<std::uint64_t>(owner[pix]);
        if (!nearer && !tie) continue;
        zbuf = z;
        owner[pix] = t.index;
        const Vec3 albedo = (l0 * a.albedo_over_z + l1 * b.albedo_over_z + l2 * c.albedo_over_z) / inv_z;
        out.mask.at(x, y) = 1;
        for (int ch = 0; ch < 3; ++ch) {
          const double v = std::clamp(albedo[ch] * t.shade, 0.0, 1.0);
          out.color.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }
    }
  }
}

}  // namespace

void DirectionalLight::validate() const {
  if (std::abs(direction.norm() - 1.0) > 1e-9) throw InputError("light: direction must be a unit vector");
  if (ambient < 0.0 || ambient > 1.0 || diffuse < 0.0 || diffuse > 1.0 || ambient + diffuse > 1.0 + 1e-12) {
    throw InputError("light: ambient and diffuse must lie in [0,1] with ambient + diffuse <= 1");
  }
}

ObjectRender ObjectRender::empty(int width, int height) {
  return ObjectRender{ImageU8(width, height, 3, 0), Mask(width, height, 1, 0),
                      DepthMap(width, height, 1, std::numeric_limits<double>::infinity())};
}

Vec3 shade_lambert(const Vec3& face_normal, const DirectionalLight& light, const Vec3& albedo) {
  const double lambert = std::max(0.0, face_normal.dot(-light.direction));
  return albedo * std::clamp(light.ambient + light.diffuse * lambert, 0.0, 1.0);
}

ObjectRender render_asset(const Mesh& mesh, const AssetTransform& transform, const Camera& camera,
                          std::size_t frame, const DirectionalLight& light, int workers) {
  light.validate();
  ObjectRender out = ObjectRender::empty(camera.width, camera.height);
  const Mat4& c2w = camera.extrinsics.at(frame);
  const Mat3 r_wc = c2w.topLeftCorner<3, 3>().transpose();
  const Vec3 cam_center = c2w.topRightCorner<3, 1>();

  std::vector<Vec3> world(mesh.vertices.size());
  std::vector<Vec3> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    world[i] = transform.apply(mesh.vertices[i]);
    cam[i] = r_wc * (world[i] - cam_center);
  }

  std::vector<ScreenTriangle> tris;
  tris.reserve(mesh.triangles.size());
  for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
    const auto& idx = mesh.triangles[ti];
    Vec3 n = (world[idx[1]] - world[idx[0]]).cross(world[idx[2]] - world[idx[0]]);
    const double len = n.norm();
    if (!(len > 0.0)) continue;
    n /= len;
    if (n.dot(cam_center - world[idx[0]]) < 0.0) n = -n;
    const double shade = std::clamp(light.ambient + light.diffuse * std::max(0.0, n.dot(-light.direction)), 0.0, 1.0);

    std::array<ClipVertex, 3> tri;
    for (int k = 0; k < 3; ++k) {
      tri[k].cam = cam[idx[k]];
      tri[k].albedo = mesh.has_vertex_colors() ? mesh.vertex_colors[idx[k]] : mesh.base_color;
    }
    const auto poly = clip_near(tri);
    if (poly.size() < 3) continue;

    std::vector<ScreenVertex> sv(poly.size());
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Vec3& p = poly[k].cam;
      sv[k].x = snap(camera.fx() * p.x() / p.z() + camera.cx());
      sv[k].y = snap(camera.fy() * p.y() / p.z() + camera.cy());
      sv[k].inv_z = 1.0 / p.z();
      sv[k].albedo_over_z = poly[k].albedo * sv[k].inv_z;
    }
    for (std::size_t k = 1; k + 1 < sv.size(); ++k) {
      ScreenTriangle st;
      st.v = {sv[0], sv[k], sv[k + 1]};
      st.area = edge(st.v[0].x, st.v[0].y, st.v[1].x, st.v[1].y, st.v[2].x, st.v[2].y);
      if (st.area == 0.0 || !std::isfinite(st.area)) continue;
      if (st.area < 0.0) {
        std::swap(st.v[1], st.v[2]);
        st.area = -st.area;
      }
      st.shade = shade;
      st.index = static_cast<std::uint32_t>(ti);
      const double minx = std::min({st.v[0].x, st.v[1].x, st.v[2].x});
      const double maxx = std::max({st.v[0].x, st.v[1].x, st.v[2].x});
      const double miny = std::min({st.v[0].y, st.v[1].y, st.v[2].y});
      const double maxy = std::max({st.v[0].y, st.v[1].y, st.v[2].y});
      const double fx0 = std::max(0.0, std::ceil(minx - 0.5));
      const double fx1 = std::min(camera.width - 1.0, std::floor(maxx - 0.5));
      const double fy0 = std::max(0.0, std::ceil(miny - 0.5));
      const double fy1 = std::min(camera.height - 1.0, std::floor(maxy - 0.5));
      if (fx0 > fx1 || fy0 > fy1) continue;
      st.x0 = static_cast<int>(fx0);
      st.x1 = static_cast<int>(fx1);
      st.y0 = static_cast<int>(fy0);
      st.y1 = static_cast<int>(fy1);
      tris.push_back(st);
    }
  }

  std::vector<std::int64_t> owner(out.mask.pixel_count(), -1);
  const int bands = std::max(1, std::min(workers, camera.height));
  parallel_for(static_cast<std::size_t>(bands), bands, [&](std::size_t b) {
    const int begin = static_cast<int>(b * camera.height / bands);
    const int end = static_cast<int>((b + 1) * camera.height / bands);
    raster_rows(tris, begin, end, out, owner);
  });
  return out;
}

}  // namespace drivedit
