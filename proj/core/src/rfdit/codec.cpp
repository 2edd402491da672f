#include "drivedit/rfdit/codec.hpp"

#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "drivedit/error.hpp"

namespace drivedit::rfdit {

LatentCodec::LatentCodec(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(kPatchDim)));
  encoder_.resize(kLatentChannels, kPatchDim);
  for (Index i = 0; i < encoder_.size(); ++i) encoder_.data()[i] = dist(rng);
  const Matrix gram = encoder_ * encoder_.transpose();
  decoder_ = encoder_.transpose() * gram.inverse();
}

LatentShape LatentCodec::latent_shape(const Frames& images) const {
  if (images.channels != kImageChannels) throw InputError("codec: images must have 3 channels");
  if (images.height % kPatch != 0 || images.width % kPatch != 0) {
    throw InputError(fmt::format("codec: image size {}x{} not divisible by {}", images.width, images.height, kPatch));
  }
  return LatentShape{images.views, images.frames, kLatentChannels, images.height / kPatch, images.width / kPatch};
}

// Index i of the decoded image matrix (rows (v,f,y,x), cols c) reads
// patch-matrix element (token, (dy * 8 + dx) * 3 + c).
std::shared_ptr<const std::vector<std::int64_t>> LatentCodec::unpatchify_index(const LatentShape& s) const {
  const std::array<int, 4> key = {s.views, s.frames, s.height, s.width};
  std::lock_guard lock(cache_mutex_);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  const int H = s.height * kPatch, W = s.width * kPatch;
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(static_cast<std::size_t>(s.views) * s.frames * H * W * kImageChannels);
  for (int img = 0; img < s.views * s.frames; ++img)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < kImageChannels; ++c) {
          const std::int64_t token = (static_cast<std::int64_t>(img) * s.height + y / kPatch) * s.width + x / kPatch;
          const std::int64_t col = ((y % kPatch) * kPatch + (x % kPatch)) * kImageChannels + c;
          idx->push_back(token * kPatchDim + col);
        }
  cache_[key] = idx;
  return idx;
}

Latent LatentCodec::encode(const Frames& images) const {
  const LatentShape shape = latent_shape(images);
  Matrix patches(shape.tokens(), kPatchDim);
  const auto idx = unpatchify_index(shape);
  // Scatter pixels into patch rows (inverse of the unpatchify gather).
  const double* src = images.pixels.data();
  double* dst = patches.data();
  for (std::size_t i = 0; i < idx->size(); ++i) dst[(*idx)[i]] = src[i];
  return Latent{shape, patches * encoder_.transpose()};
}

Frames LatentCodec::decode(const Latent& latent) const {
  const LatentShape& s = latent.shape;
  if (s.channels != kLatentChannels) throw InputError("codec: latent must have 4 channels");
  const Matrix patches = latent.tokens * decoder_.transpose();
  Frames out = Frames::zeros(s.views, s.frames, s.height * kPatch, s.width * kPatch, kImageChannels);
  const auto idx = unpatchify_index(s);
  for (std::size_t i = 0; i < idx->size(); ++i) out.pixels.data()[i] = patches.data()[(*idx)[i]];
  return out;
}

Var LatentCodec::decode(const Var& tokens, const LatentShape& s) const {
  Tape& t = tokens.tape();
  const Var patches = matmul(tokens, t.constant(decoder_.transpose()));
  const Index rows = static_cast<Index>(s.views) * s.frames * s.height * kPatch * s.width * kPatch;
  return gather(patches, rows, kImageChannels, unpatchify_index(s));
}

}  // namespace drivedit::rfdit
