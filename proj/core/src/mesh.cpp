#include "drivedit/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <fmt/format.h>

namespace drivedit {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

Mat3 rot_z(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace

Vec3 AssetTransform::apply(const Vec3& p) const {
  return rot_z(yaw) * scale.cwiseProduct(p) + translation;
}

FitMode parse_fit_mode(std::string_view name) {
  if (name == "per-axis" || name == "per_axis") return FitMode::per_axis;
  if (name == "uniform") return FitMode::uniform;
  throw InputError(fmt::format("unknown fit mode '{}'", name));
}

Mesh parse_obj(std::string_view text) {
  Mesh mesh;
  std::vector<std::optional<Vec3>> colors;
  std::vector<std::vector<long>> faces;
  std::vector<std::size_t> face_lines;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "v") {
      if (tok.size() != 4 && tok.size() != 7) {
        throw InputError(fmt::format("OBJ line {}: vertex needs 3 or 6 numbers", line_no));
      }
      std::array<double, 6> vals{};
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const auto v = to_double(tok[i]);
        if (!v) throw InputError(fmt::format("OBJ line {}: non-numeric coordinate '{}'", line_no, tok[i]));
        vals[i - 1] = *v;
      }
      mesh.vertices.emplace_back(vals[0], vals[1], vals[2]);
      colors.push_back(tok.size() == 7 ? std::optional<Vec3>(Vec3(vals[3], vals[4], vals[5])) : std::nullopt);
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw InputError(fmt::format("OBJ line {}: face needs at least 3 vertices", line_no));
      std::vector<long> idx;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const std::string_view head = tok[i].substr(0, tok[i].find('/'));
        long v = 0;
        const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), v);
        if (ec != std::errc() || ptr != head.data() + head.size() || v == 0) {
          throw InputError(fmt::format("OBJ line {}: invalid face index '{}'", line_no, tok[i]));
        }
        // Negative indices are relative to the vertices defined so far.
        if (v < 0) v = static_cast<long>(mesh.vertices.size()) + v + 1;
        idx.push_back(v - 1);
      }
      faces.push_back(std::move(idx));
      face_lines.push_back(line_no);
    }
  }
  const long nv = static_cast<long>(mesh.vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (long i : faces[f]) {
      if (i < 0 || i >= nv) {
        throw InputError(fmt::format("OBJ line {}: face index {} out of range ({} vertices)", face_lines[f],
                                     i + 1, nv));
      }
    }
    for (std::size_t k = 1; k + 1 < faces[f].size(); ++k) {
      const std::array<std::uint32_t, 3> tri = {static_cast<std::uint32_t>(faces[f][0]),
                                                static_cast<std::uint32_t>(faces[f][k]),
                                                static_cast<std::uint32_t>(faces[f][k + 1])};
      const Vec3& a = mesh.vertices[tri[0]];
      const double area = 0.5 * (mesh.vertices[tri[1]] - a).cross(mesh.vertices[tri[2]] - a).norm();
      if (area <= kDegenerateArea) {
        ++mesh.dropped_degenerate;
        continue;
      }
      mesh.triangles.push_back(tri);
    }
  }
  if (mesh.vertices.size() < 3 || mesh.triangles.empty()) throw InputError("OBJ: empty mesh");
  const bool all_colored = std::all_of(colors.begin(), colors.end(), [](const auto& c) { return c.has_value(); });
  if (all_colored) {
    for (const auto& c : colors) mesh.vertex_colors.push_back(c->cwiseMax(0.0).cwiseMin(1.0));
  }
  return mesh;
}

Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("{}: missing file", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_obj(ss.str());
  } catch (const InputError& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string to_obj(const Mesh& mesh) {
  std::string out;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    if (mesh.has_vertex_colors()) {
      const Vec3& c = mesh.vertex_colors[i];
      out += fmt::format("v {} {} {} {} {} {}\n", v.x(), v.y(), v.z(), c.x(), c.y(), c.z());
    } else {
      out += fmt::format("v {} {} {}\n", v.x(), v.y(), v.z());
    }
  }
  for (const auto& t : mesh.triangles) out += fmt::format("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1);
  return out;
}

Aabb mesh_aabb(const Mesh& mesh) {
  if (mesh.triangles.empty()) throw InputError("mesh_aabb: empty mesh");
  constexpr double inf = std::numeric_limits<double>::infinity();
  Aabb box{Vec3::Constant(inf), Vec3::Constant(-inf)};
  for (const auto& tri : mesh.triangles) {
    for (std::uint32_t i : tri) {
      box.min = box.min.cwiseMin(mesh.vertices[i]);
      box.max = box.max.cwiseMax(mesh.vertices[i]);
    }
  }
  return box;
}

AssetTransform fit_mesh_to_box(const Mesh& mesh, const BBox3D& box, FitMode mode) {
  const Aabb aabb = mesh_aabb(mesh);
  const Vec3 ext = aabb.extent();
  if (!(ext.array() > 0.0).all()) throw InputError("fit_mesh_to_box: mesh AABB has a zero extent");
  // Asset x is forward, so it takes the box length.
  const Vec3 ratio(box.length() / ext.x(), box.width() / ext.y(), box.height() / ext.z());
  AssetTransform t;
  t.yaw = box.yaw;
  if (mode == FitMode::per_axis) {
    t.scale = ratio;
    t.translation = box.center - rot_z(box.yaw) * t.scale.cwiseProduct(aabb.center());
  } else {
    t.scale = Vec3::Constant(ratio.minCoeff());
    const Vec3 bottom_center(aabb.center().x(), aabb.center().y(), aabb.min.z());
    t.translation = box.center - Vec3(0, 0, 0.5 * box.height()) - rot_z(box.yaw) * t.scale.cwiseProduct(bottom_center);
  }
  return t;
}

std::vector<AssetEntry> load_asset_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("{}: missing file", path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
  if (!j.is_array()) throw InputError(fmt::format("{}: expected an array of assets", path.string()));
  std::vector<AssetEntry> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string ctx = fmt::format("{}[{}]", path.string(), i);
    try {
      AssetEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.category = parse_category(e.at("category").get<std::string>());
      entry.path = path.parent_path() / e.at("path").get<std::string>();
      if (e.contains("base_color")) {
        const auto c = e.at("base_color").get<std::vector<double>>();
        if (c.size() != 3) throw InputError("base_color must have 3 entries");
        entry.base_color = Vec3(c[0], c[1], c[2]).cwiseMax(0.0).cwiseMin(1.0);
      }
      out.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& ex) {
      throw InputError(fmt::format("{}: {}", ctx, ex.what()));
    } catch (const InputError& ex) {
      throw InputError(fmt::format("{}: {}", ctx, ex.what()));
    }
  }
  return out;
}

Mesh load_asset(const AssetEntry& entry) {
  Mesh m = load_obj(entry.path);
  m.base_color = entry.base_color;
  return m;
}

}  // namespace drivedit
