#include "drivedit/rfdit/latent.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "drivedit/error.hpp"

namespace drivedit::rfdit {

Latent Latent::zeros(const LatentShape& shape) {
  return Latent{shape, Matrix::Zero(shape.tokens(), shape.channels)};
}

Latent Latent::normal(const LatentShape& shape, std::uint64_t seed) {
  Latent z = zeros(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Index i = 0; i < z.tokens.size(); ++i) z.tokens.data()[i] = dist(rng);
  return z;
}

double& Latent::at(int v, int f, int c, int y, int x) {
  const Index row = ((static_cast<Index>(v) * shape.frames + f) * shape.height + y) * shape.width + x;
  return tokens(row, c);
}

double Latent::at(int v, int f, int c, int y, int x) const {
  return const_cast<Latent*>(this)->at(v, f, c, y, x);
}

Frames Frames::zeros(int views, int frames, int height, int width, int channels) {
  Frames out{views, frames, height, width, channels, Matrix()};
  out.pixels = Matrix::Zero(static_cast<Index>(views) * frames * height * width, channels);
  return out;
}

double& Frames::at(int v, int f, int y, int x, int c) {
  const Index row = ((static_cast<Index>(v) * frames + f) * height + y) * width + x;
  return pixels(row, c);
}

double Frames::at(int v, int f, int y, int x, int c) const { return const_cast<Frames*>(this)->at(v, f, y, x, c); }

void store_image(Frames& dst, int view, int frame, const ImageU8& image) {
  if (image.width() != dst.width || image.height() != dst.height) throw Error("store_image: shape mismatch");
  if (image.channels() != 1 && image.channels() != dst.channels) throw Error("store_image: channel mismatch");
  for (int y = 0; y < dst.height; ++y)
    for (int x = 0; x < dst.width; ++x)
      for (int c = 0; c < dst.channels; ++c) {
        const int src_c = image.channels() == 1 ? 0 : c;
        dst.at(view, frame, y, x, c) = image.at(x, y, src_c) / 127.5 - 1.0;
      }
}

void store_mask(Frames& dst, int view, int frame, const Mask& mask) {
  if (mask.width() != dst.width || mask.height() != dst.height) throw Error("store_mask: shape mismatch");
  for (int y = 0; y < dst.height; ++y)
    for (int x = 0; x < dst.width; ++x)
      for (int c = 0; c < dst.channels; ++c) dst.at(view, frame, y, x, c) = mask.at(x, y) ? 1.0 : -1.0;
}

ImageU8 load_image(const Frames& src, int view, int frame) {
  ImageU8 out(src.width, src.height, 3, 0);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = (src.at(view, frame, y, x, std::min(c, src.channels - 1)) + 1.0) * 127.5;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
  return out;
}

}  // namespace drivedit::rfdit
