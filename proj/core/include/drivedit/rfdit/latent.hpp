#pragma once

#include <cstdint>

#include "drivedit/image.hpp"
#include "drivedit/rfdit/autograd.hpp"

namespace drivedit::rfdit {

/// (views V, frames F, channels C, height h, width w).
struct LatentShape {
  int views = 1;
  int frames = 1;
  int channels = 4;
  int height = 1;
  int width = 1;

  Index tokens() const { return static_cast<Index>(views) * frames * height * width; }
  Index elements() const { return tokens() * channels; }
  friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

/// Latent tensor stored as a token matrix: one row per (view, frame, y, x) in
/// row-major order, one column per channel.
struct Latent {
  LatentShape shape;
  Matrix tokens;

  static Latent zeros(const LatentShape& shape);
  /// Seeded standard normal entries.
  static Latent normal(const LatentShape& shape, std::uint64_t seed);

  double& at(int v, int f, int c, int y, int x);
  double at(int v, int f, int c, int y, int x) const;
  bool all_finite() const { return tokens.allFinite(); }
};

/// A stack of V x F images with values in [-1, 1], rows (v, f, y, x), cols channels.
struct Frames {
  int views = 1;
  int frames = 1;
  int height = 0;
  int width = 0;
  int channels = 3;
  Matrix pixels;

  static Frames zeros(int views, int frames, int height, int width, int channels);
  double& at(int v, int f, int y, int x, int c);
  double at(int v, int f, int y, int x, int c) const;
  int images() const { return views * frames; }
};

/// 8-bit image -> [-1, 1]; single-channel images are replicated to `channels`.
void store_image(Frames& dst, int view, int frame, const ImageU8& image);
/// Binary mask (0/1) -> {-1, 1} replicated over channels.
void store_mask(Frames& dst, int view, int frame, const Mask& mask);
/// [-1, 1] -> 8-bit RGB (clamped, rounded).
ImageU8 load_image(const Frames& src, int view, int frame);

}  // namespace drivedit::rfdit
