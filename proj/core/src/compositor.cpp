#include "drivedit/compositor.hpp"

#include <algorithm>
#include <cmath>

namespace drivedit {

void CompositeConfig::validate() const {
  if (!(depth_bias >= 0.0)) throw InputError("composite: depth_bias must be >= 0");
  if (feather < 0) throw InputError("composite: feather must be >= 0");
}

Mask drawn_mask(const ObjectRender& render, const DepthMap* scene_depth, const CompositeConfig& cfg) {
  Mask drawn(render.mask.width(), render.mask.height(), 1, 0);
  for (int y = 0; y < drawn.height(); ++y) {
    for (int x = 0; x < drawn.width(); ++x) {
      if (!render.mask.at(x, y)) continue;
      bool draw = true;
      if (scene_depth) {
        const double z = scene_depth->at(x, y);
        const bool valid = std::isfinite(z) && z > 0.0;
        draw = !valid || render.depth.at(x, y) < z + cfg.depth_bias;
      }
      drawn.at(x, y) = draw ? 1 : 0;
    }
  }
  return drawn;
}

ImageU8 composite_naive(const ImageU8& frame, const ObjectRender& render, const DepthMap* scene_depth,
                        const CompositeConfig& cfg) {
  cfg.validate();
  if (!frame.same_shape(render.mask) || !frame.same_shape(render.color) || frame.channels() != 3 ||
      (scene_depth && !frame.same_shape(*scene_depth))) {
    throw InputError("composite_naive: shape mismatch");
  }
  const Mask drawn = drawn_mask(render, scene_depth, cfg);
  ImageU8 out = frame;
  const int w = frame.width(), h = frame.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!drawn.at(x, y)) continue;
      double alpha = 1.0;
      if (cfg.feather > 0) {
        // Chebyshev distance to the nearest undrawn pixel (image outside counts as undrawn).
        int d = cfg.feather + 1;
        for (int r = 1; r <= cfg.feather; ++r) {
          bool hit = false;
          for (int j = -r; j <= r && !hit; ++j) {
            for (int i = -r; i <= r; ++i) {
              if (std::max(std::abs(i), std::abs(j)) != r) continue;
              const int nx = x + i, ny = y + j;
              if (!drawn.contains(nx, ny) || !drawn.at(nx, ny)) {
                hit = true;
                break;
              }
            }
          }
          if (hit) {
            d = r;
            break;
          }
        }
        alpha = std::min(1.0, static_cast<double>(d) / (cfg.feather + 1));
      }
      for (int c = 0; c < 3; ++c) {
        const double v = alpha * render.color.at(x, y, c) + (1.0 - alpha) * frame.at(x, y, c);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace drivedit
