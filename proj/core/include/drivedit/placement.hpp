#pragma once

// Insertion trajectories by view/distance bin, feasibility checks and
// annotation export. Bins are evaluated in the ego frame of frame 0, which is
// the world frame of a bundle.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drivedit/scene_model.hpp"

namespace drivedit {

enum class ViewBin { front, back, left, right };
enum class DistanceBin { close, mid, far };
inline constexpr std::array<ViewBin, 4> kAllViewBins = {ViewBin::front, ViewBin::back, ViewBin::left,
                                                        ViewBin::right};
inline constexpr std::array<DistanceBin, 3> kAllDistanceBins = {DistanceBin::close, DistanceBin::mid,
                                                                DistanceBin::far};

std::string_view to_string(ViewBin v);
std::string_view to_string(DistanceBin d);
ViewBin parse_view_bin(std::string_view s);
DistanceBin parse_distance_bin(std::string_view s);

struct DistanceThresholds {
  double close_max = 15.0;  ///< close: d < close_max
  double mid_max = 30.0;    ///< mid: close_max <= d < mid_max, far: d >= mid_max
  double min_range = 5.0;   ///< sampling only: keep clear of the ego vehicle
  double far_range = 50.0;  ///< sampling only: outer radius of the far band
};

/// theta = atan2(y, x). front |theta| <= pi/4; left (pi/4, 3pi/4];
/// right [-3pi/4, -pi/4); back otherwise. Throws InputError at the origin.
ViewBin classify_view(const Vec3& center_ego);
DistanceBin classify_distance(const Vec3& center_ego, const DistanceThresholds& thresholds = {});

struct PlacementSpec {
  Category category = Category::car;
  ViewBin view = ViewBin::front;
  DistanceBin distance = DistanceBin::mid;
  double speed = 0.0;  ///< m/s, 0 = static
  std::uint64_t seed = 0;
};
PlacementSpec placement_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json placement_spec_to_json(const PlacementSpec& spec);

struct Trajectory {
  std::vector<BBox3D> boxes;  ///< one per frame
  Category category = Category::car;
  std::string id;
};

/// Default (w, l, h) per category, read from a JSON table.
class CategoryDims {
 public:
  static CategoryDims load(const std::filesystem::path& path);
  /// Looks for category_dims.json next to the sources, then in the install prefix.
  static CategoryDims load_default();
  Vec3 at(Category c) const;

 private:
  std::map<Category, Vec3> dims_;
};

/// Oriented BEV rectangle overlap by the separating-axis test. `inflate_a`
/// grows each half-extent of `a`. Touching counts as overlap.
bool footprints_overlap(const BBox3D& a, const BBox3D& b, double inflate_a = 0.0);

struct CollisionReport {
  bool ok = true;
  std::size_t frame = 0;
  std::string box_id;
};
inline constexpr double kSafetyInflation = 0.5;
CollisionReport check_collision(const Trajectory& traj, const SceneBundle& scene,
                                double inflation = kSafetyInflation);

struct VisibilityParams {
  double min_pixels = 100.0;
  std::size_t min_frames = 0;  ///< 0 = max(1, T/2)
};
struct VisibilityReport {
  bool visible = false;
  std::size_t frames_visible = 0;
  std::vector<double> best_area;  ///< per frame, largest over cameras
};
/// Area of the projected box-corner hull clipped to the image. Boxes with any
/// corner behind the near plane count as 0.
double projected_hull_area(const BBox3D& box, const Camera& camera, std::size_t frame);
VisibilityReport check_visibility(const Trajectory& traj, const SceneBundle& scene,
                                  const VisibilityParams& params = {});

struct PlacementOptions {
  DistanceThresholds bins;
  VisibilityParams visibility;
  double inflation = kSafetyInflation;
  double heading_jitter_deg = 10.0;
  std::size_t max_draws = 10000;
  std::string id = "inserted_0";
  Vec3 size = Vec3::Zero();  ///< (w, l, h); zero = category default
};

class NoFeasiblePlacement : public Error {
 public:
  using Error::Error;
};

/// Seeded rejection sampling. Draw i uses its own substream of spec.seed, so
/// the accepted draw (the lowest passing index) is independent of threading.
Trajectory sample_placement(const SceneBundle& scene, const PlacementSpec& spec,
                            const PlacementOptions& options = {}, const CategoryDims& dims = CategoryDims::load_default());

/// Writes scene boxes plus the trajectory boxes (appended per frame) to
/// `out_path` in boxes.json format.
void export_annotations(const Trajectory& traj, const std::vector<std::vector<BBox3D>>& scene_boxes,
                        const std::filesystem::path& out_path);

}  // namespace drivedit
