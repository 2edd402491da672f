#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>

#include "drivedit/rfdit/latent.hpp"

namespace drivedit::rfdit {

/// Frozen linear stand-in for the image autoencoder: 8x8x3 patches are
/// mapped by a seeded full-row-rank matrix E (4 x 192) to 4 latent channels;
/// decoding applies the pseudo-inverse E^T (E E^T)^-1 and unpatchifies.
/// encode(decode(z)) = z, and decode(encode(.)) is an orthogonal projection.
class LatentCodec {
 public:
  static constexpr int kPatch = 8;
  static constexpr int kImageChannels = 3;
  static constexpr int kPatchDim = kPatch * kPatch * kImageChannels;
  static constexpr int kLatentChannels = 4;

  explicit LatentCodec(std::uint64_t seed = 0x5eed'c0dec);

  LatentShape latent_shape(const Frames& images) const;
  /// Throws InputError if height/width are not multiples of 8 or channels != 3.
  Latent encode(const Frames& images) const;
  Frames decode(const Latent& latent) const;
  /// Differentiable decode of token rows laid out as `shape`.
  Var decode(const Var& tokens, const LatentShape& shape) const;

  const Matrix& encoder() const { return encoder_; }
  const Matrix& decoder() const { return decoder_; }

 private:
  std::shared_ptr<const std::vector<std::int64_t>> unpatchify_index(const LatentShape& shape) const;

  Matrix encoder_;  // 4 x 192
  Matrix decoder_;  // 192 x 4
  mutable std::mutex cache_mutex_;
  mutable std::map<std::array<int, 4>, std::shared_ptr<const std::vector<std::int64_t>>> cache_;
};

}  // namespace drivedit::rfdit
