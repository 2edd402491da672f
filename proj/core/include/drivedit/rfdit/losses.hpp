#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "drivedit/rfdit/latent.hpp"

namespace drivedit::rfdit {

inline constexpr double kMaskEps = 1e-6;

struct LossWeights {
  double diffusion = 1.0;
  double mask = 0.1;
  double lpips = 0.1;
  /// Throws InputError on a negative or non-finite weight.
  void validate() const;
};

struct LossParts {
  double diffusion = 0.0;
  double mask = 0.0;
  double lpips = 0.0;
};

double loss_total(const LossParts& parts, const LossWeights& weights);
Var loss_total(const Var& diffusion, const Var& mask, const Var& lpips, const LossWeights& weights);

/// Mean squared error over all elements.
Var loss_diffusion(const Var& pred, const Var& target);
double loss_diffusion(const Matrix& pred, const Matrix& target);

/// sum((M (x_hat - x))^2) / (sum(M) + eps); `mask` holds 0/1 per element.
Var loss_mask(const Var& x_hat, const Var& x, const Matrix& mask);
double loss_mask(const Matrix& x_hat, const Matrix& x, const Matrix& mask);

/// Frozen seeded feature extractor: three 3x3 stride-2 pad-1 convolutions
/// (3 -> 8 -> 16 -> 32 channels) with tanh. The loss unit-normalizes each
/// feature vector, takes the mean squared difference per layer, and averages
/// over layers.
class PerceptualNet {
 public:
  static constexpr std::array<int, 4> kChannels = {3, 8, 16, 32};

  explicit PerceptualNet(std::uint64_t seed = 0x1b1b5);

  /// Images are rows (image, y, x) x 3 channels.
  Var loss(const Var& x_hat, const Var& x, int images, int height, int width) const;
  double loss(const Frames& x_hat, const Frames& x) const;
  /// Per-layer feature maps, rows (image, y, x) x channels.
  std::vector<Var> features(const Var& images, int count, int height, int width) const;

  /// Weights of layer l: (9 * c_in) x c_out, rows ordered (ky, kx, c_in).
  const Matrix& weight(int layer) const { return weights_[layer]; }
  const Matrix& bias(int layer) const { return biases_[layer]; }

 private:
  std::array<Matrix, 3> weights_;
  std::array<Matrix, 3> biases_;
};

}  // namespace drivedit::rfdit
