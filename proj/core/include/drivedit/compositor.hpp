#pragma once

#include <optional>

#include "drivedit/image.hpp"
#include "drivedit/rasterizer.hpp"

namespace drivedit {

struct CompositeConfig {
  double depth_bias = 0.05;  ///< meters
  int feather = 0;           ///< px, 0 = hard edge

  void validate() const;
};

/// Naive insertion: pastes the rendered asset over `frame`. A masked pixel is
/// drawn when the scene depth there is missing or invalid, or when
/// render.depth < scene_depth + depth_bias. With feather f > 0, a drawn pixel at Chebyshev
/// distance d from the nearest undrawn pixel gets alpha = min(1, d / (f + 1));
/// pixels that are not drawn are never modified.
ImageU8 composite_naive(const ImageU8& frame, const ObjectRender& render, const DepthMap* scene_depth,
                        const CompositeConfig& cfg = {});

/// The set of pixels composite_naive would draw.
Mask drawn_mask(const ObjectRender& render, const DepthMap* scene_depth, const CompositeConfig& cfg = {});

}  // namespace drivedit
