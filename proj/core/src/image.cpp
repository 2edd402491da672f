#include "drivedit/image.hpp"

#include <algorithm>
#include <cmath>

namespace drivedit {

Mask dilate(const Mask& mask, int radius) {
  if (radius <= 0) return mask;
  const int w = mask.width();
  const int h = mask.height();
  // Separable max filter: rows then columns.
  Mask rows(w, h, 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const int x0 = std::max(0, x - radius);
      const int x1 = std::min(w - 1, x + radius);
      for (int xx = x0; xx <= x1; ++xx) rows.at(xx, y) = 1;
    }
  }
  Mask out(w, h, 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!rows.at(x, y)) continue;
      const int y0 = std::max(0, y - radius);
      const int y1 = std::min(h - 1, y + radius);
      for (int yy = y0; yy <= y1; ++yy) out.at(x, yy) = 1;
    }
  }
  return out;
}

ImageU8 to_grayscale(const ImageU8& rgb) {
  if (rgb.channels() != 3) throw Error("to_grayscale: expected 3 channels");
  ImageU8 gray(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const double v = 0.299 * rgb.at(x, y, 0) + 0.587 * rgb.at(x, y, 1) + 0.114 * rgb.at(x, y, 2);
      gray.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return gray;
}

}  // namespace drivedit
