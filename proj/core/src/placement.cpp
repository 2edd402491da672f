#include "drivedit/placement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "drivedit/rasterizer.hpp"
#include "drivedit/rng.hpp"

namespace drivedit {
namespace {

constexpr double kPi = std::numbers::pi;

using Polygon = std::vector<Vec2>;

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain, counter-clockwise, no collinear points.
Polygon convex_hull(Polygon pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

// Clips a convex polygon to the half-plane n·p <= d.
Polygon clip_half_plane(const Polygon& poly, const Vec2& n, double d) {
  Polygon out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const double da = n.dot(a) - d;
    const double db = n.dot(b) - d;
    if (da <= 0) out.push_back(a);
    if ((da < 0) != (db < 0) && da != db) out.push_back(a + (b - a) * (da / (da - db)));
  }
  return out;
}

double polygon_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

std::array<Vec2, 4> footprint(const BBox3D& b, double inflate) {
  const double hl = 0.5 * b.length() + inflate;
  const double hw = 0.5 * b.width() + inflate;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const Vec2 ax(c, s), ay(-s, c);
  const Vec2 ctr = b.center.head<2>();
  return {ctr + hl * ax - hw * ay, ctr + hl * ax + hw * ay, ctr - hl * ax + hw * ay, ctr - hl * ax - hw * ay};
}

// Sector [lo, hi] in radians for sampling; back wraps through pi.
std::pair<double, double> view_sector(ViewBin v) {
  switch (v) {
    case ViewBin::front: return {-kPi / 4, kPi / 4};
    case ViewBin::left: return {kPi / 4, 3 * kPi / 4};
    case ViewBin::right: return {-3 * kPi / 4, -kPi / 4};
    case ViewBin::back: return {3 * kPi / 4, 5 * kPi / 4};
  }
  return {0, 0};
}

std::pair<double, double> distance_band(DistanceBin d, const DistanceThresholds& t) {
  switch (d) {
    case DistanceBin::close: return {t.min_range, t.close_max};
    case DistanceBin::mid: return {t.close_max, t.mid_max};
    case DistanceBin::far: return {t.mid_max, t.far_range};
  }
  return {0, 0};
}

}  // namespace

std::string_view to_string(ViewBin v) {
  switch (v) {
    case ViewBin::front: return "front";
    case ViewBin::back: return "back";
    case ViewBin::left: return "left";
    case ViewBin::right: return "right";
  }
  return "?";
}

std::string_view to_string(DistanceBin d) {
  switch (d) {
    case DistanceBin::close: return "close";
    case DistanceBin::mid: return "mid";
    case DistanceBin::far: return "far";
  }
  return "?";
}

ViewBin parse_view_bin(std::string_view s) {
  for (ViewBin v : kAllViewBins)
    if (to_string(v) == s) return v;
  throw InputError(fmt::format("unknown view bin '{}'", s));
}

DistanceBin parse_distance_bin(std::string_view s) {
  for (DistanceBin d : kAllDistanceBins)
    if (to_string(d) == s) return d;
  throw InputError(fmt::format("unknown distance bin '{}'", s));
}

ViewBin classify_view(const Vec3& c) {
  if (c.x() == 0.0 && c.y() == 0.0) throw InputError("classify_view: center at the ego origin");
  const double theta = std::atan2(c.y(), c.x());
  if (std::abs(theta) <= kPi / 4) return ViewBin::front;
  if (theta > kPi / 4 && theta <= 3 * kPi / 4) return ViewBin::left;
  if (theta >= -3 * kPi / 4 && theta < -kPi / 4) return ViewBin::right;
  return ViewBin::back;
}

DistanceBin classify_distance(const Vec3& c, const DistanceThresholds& t) {
  const double d = std::hypot(c.x(), c.y());
  if (d < t.close_max) return DistanceBin::close;
  if (d < t.mid_max) return DistanceBin::mid;
  return DistanceBin::far;
}

PlacementSpec placement_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("placement spec: expected an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "category" && key != "view" && key != "distance" && key != "speed" && key != "seed") {
      throw InputError(fmt::format("placement spec: unknown key '{}'", key));
    }
  }
  PlacementSpec s;
  try {
    s.category = parse_category(j.at("category").get<std::string>());
    s.view = parse_view_bin(j.at("view").get<std::string>());
    s.distance = parse_distance_bin(j.at("distance").get<std::string>());
    s.speed = j.value("speed", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("placement spec: {}", e.what()));
  }
  if (!(s.speed >= 0.0) || !std::isfinite(s.speed)) throw InputError("placement spec: speed must be >= 0");
  return s;
}

nlohmann::ordered_json placement_spec_to_json(const PlacementSpec& s) {
  nlohmann::ordered_json j;
  j["category"] = std::string(to_string(s.category));
  j["view"] = std::string(to_string(s.view));
  j["distance"] = std::string(to_string(s.distance));
  j["speed"] = s.speed;
  j["seed"] = s.seed;
  return j;
}

CategoryDims CategoryDims::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("{}: missing file", path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
  CategoryDims out;
  for (Category c : kAllCategories) {
    const std::string name(to_string(c));
    if (!j.contains(name)) continue;
    const auto v = j.at(name).get<std::vector<double>>();
    if (v.size() != 3 || !(v[0] > 0 && v[1] > 0 && v[2] > 0)) {
      throw InputError(fmt::format("{}: '{}' needs three positive dimensions", path.string(), name));
    }
    out.dims_[c] = Vec3(v[0], v[1], v[2]);
  }
  return out;
}

CategoryDims CategoryDims::load_default() {
  static const CategoryDims table = [] {
    const std::filesystem::path candidates[] = {
        std::filesystem::path(DRIVEDIT_SOURCE_DATA_DIR) / "category_dims.json",
        std::filesystem::path(DRIVEDIT_INSTALL_DATA_DIR) / "category_dims.json"};
    for (const auto& p : candidates) {
      if (std::filesystem::exists(p)) return load(p);
    }
    throw InputError("category_dims.json not found");
  }();
  return table;
}

Vec3 CategoryDims::at(Category c) const {
  const auto it = dims_.find(c);
  if (it == dims_.end()) throw InputError(fmt::format("no default dimensions for '{}'", to_string(c)));
  return it->second;
}

bool footprints_overlap(const BBox3D& a, const BBox3D& b, double inflate_a) {
  const auto pa = footprint(a, inflate_a);
  const auto pb = footprint(b, 0.0);
  for (const auto* poly : {&pa, &pb}) {
    for (int e = 0; e < 2; ++e) {
      const Vec2 edge_dir = (*poly)[e + 1] - (*poly)[e];
      const Vec2 axis(-edge_dir.y(), edge_dir.x());
      double amin = INFINITY, amax = -INFINITY, bmin = INFINITY, bmax = -INFINITY;
      for (const Vec2& p : pa) {
        amin = std::min(amin, axis.dot(p));
        amax = std::max(amax, axis.dot(p));
      }
      for (const Vec2& p : pb) {
        bmin = std::min(bmin, axis.dot(p));
        bmax = std::max(bmax, axis.dot(p));
      }
      if (amax < bmin || bmax < amin) return false;
    }
  }
  return true;
}

CollisionReport check_collision(const Trajectory& traj, const SceneBundle& scene, double inflation) {
  if (traj.boxes.size() != scene.frame_count()) throw InputError("check_collision: trajectory length != T");
  for (std::size_t f = 0; f < traj.boxes.size(); ++f) {
    for (const BBox3D& other : scene.boxes[f]) {
      if (other.id == traj.id) continue;
      if (footprints_overlap(traj.boxes[f], other, inflation)) return {false, f, other.id};
    }
  }
  return {};
}

double projected_hull_area(const BBox3D& box, const Camera& camera, std::size_t frame) {
  Polygon pts;
  for (const Vec3& corner : box_corners(box)) {
    const auto p = project_point(camera, frame, corner);
    if (!p || p->z < kNearPlane) return 0.0;
    pts.emplace_back(p->u, p->v);
  }
  Polygon hull = convex_hull(std::move(pts));
  hull = clip_half_plane(hull, Vec2(-1, 0), 0.0);
  hull = clip_half_plane(hull, Vec2(1, 0), camera.width);
  hull = clip_half_plane(hull, Vec2(0, -1), 0.0);
  hull = clip_half_plane(hull, Vec2(0, 1), camera.height);
  return hull.size() < 3 ? 0.0 : polygon_area(hull);
}

VisibilityReport check_visibility(const Trajectory& traj, const SceneBundle& scene, const VisibilityParams& params) {
  VisibilityReport r;
  const std::size_t need =
      params.min_frames > 0 ? params.min_frames : std::max<std::size_t>(1, scene.frame_count() / 2);
  for (std::size_t f = 0; f < traj.boxes.size(); ++f) {
    double best = 0.0;
    for (const Camera& cam : scene.cameras) best = std::max(best, projected_hull_area(traj.boxes[f], cam, f));
    r.best_area.push_back(best);
    if (best >= params.min_pixels) ++r.frames_visible;
  }
  r.visible = r.frames_visible >= need;
  return r;
}

Trajectory sample_placement(const SceneBundle& scene, const PlacementSpec& spec, const PlacementOptions& options,
                            const CategoryDims& dims) {
  const Vec3 size = options.size.isZero() ? dims.at(spec.category) : options.size;
  const auto [theta_lo, theta_hi] = view_sector(spec.view);
  const auto [r_lo, r_hi] = distance_band(spec.distance, options.bins);
  if (!(r_hi > r_lo) || r_lo < 0) throw InputError("sample_placement: empty distance band");
  const double jitter = options.heading_jitter_deg * kPi / 180.0;
  const double dt = 1.0 / scene.meta.fps;

  std::size_t rejected_bins = 0, rejected_collision = 0, rejected_visibility = 0;
  for (std::size_t draw = 0; draw < options.max_draws; ++draw) {
    std::mt19937_64 rng = make_engine(spec.seed, fmt::format("draw/{}", draw));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double theta = theta_lo + (theta_hi - theta_lo) * unit(rng);
    const double r = std::sqrt(r_lo * r_lo + (r_hi * r_hi - r_lo * r_lo) * unit(rng));
    const double heading = wrap_angle((2.0 * unit(rng) - 1.0) * jitter);
    const Vec3 start(r * std::cos(theta), r * std::sin(theta), 0.5 * size.z());
    // Sector edges are half-open differently per bin; re-check with the classifiers.
    if (classify_view(start) != spec.view || classify_distance(start, options.bins) != spec.distance) {
      ++rejected_bins;
      continue;
    }
    Trajectory traj;
    traj.category = spec.category;
    traj.id = options.id;
    const Vec3 dir(std::cos(heading), std::sin(heading), 0.0);
    for (std::size_t f = 0; f < scene.frame_count(); ++f) {
      BBox3D b;
      b.center = start + (spec.speed * static_cast<double>(f) * dt) * dir;
      b.size = size;
      b.yaw = heading;
      b.category = spec.category;
      b.id = options.id;
      traj.boxes.push_back(b);
    }
    if (!check_collision(traj, scene, options.inflation).ok) {
      ++rejected_collision;
      continue;
    }
    if (!check_visibility(traj, scene, options.visibility).visible) {
      ++rejected_visibility;
      continue;
    }
    return traj;
  }
  const char* worst = rejected_collision >= rejected_visibility ? "collision" : "visibility";
  if (rejected_bins > std::max(rejected_collision, rejected_visibility)) worst = "bin boundary";
  throw NoFeasiblePlacement(fmt::format(
      "no feasible placement for ({}, {}) after {} draws; most frequent rejection: {} "
      "(collision {}, visibility {}, bin boundary {})",
      to_string(spec.view), to_string(spec.distance), options.max_draws, worst, rejected_collision,
      rejected_visibility, rejected_bins));
}

void export_annotations(const Trajectory& traj, const std::vector<std::vector<BBox3D>>& scene_boxes,
                        const std::filesystem::path& out_path) {
  if (traj.boxes.size() != scene_boxes.size()) throw InputError("export_annotations: trajectory length != T");
  auto frames = scene_boxes;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (const BBox3D& b : frames[f]) {
      if (b.id == traj.id) throw InputError(fmt::format("export_annotations: id '{}' already present", traj.id));
    }
    frames[f].push_back(traj.boxes[f]);
  }
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error(fmt::format("{}: cannot write", out_path.string()));
  out << boxes_to_json(frames).dump(2) << '\n';
  if (!out) throw Error(fmt::format("{}: write failed", out_path.string()));
}

}  // namespace drivedit
