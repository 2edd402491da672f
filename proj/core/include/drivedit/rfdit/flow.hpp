#pragma once

#include <cstdint>
#include <functional>

#include "drivedit/rfdit/latent.hpp"

namespace drivedit::rfdit {

struct FlowPair {
  Latent x_t;
  Latent velocity;
};

/// Straight path from noise x0 (t = 0) to data x1 (t = 1).
FlowPair rf_pair(const Latent& x0, const Latent& x1, double t);

/// v_uncond + w (v_cond - v_uncond); w = 1 and w = 0 return the matching input exactly.
Latent cfg_combine(const Latent& v_uncond, const Latent& v_cond, double w);

/// Velocity at (x, t).
using VelocityField = std::function<Latent(const Latent& x, double t)>;

/// Conditional and unconditional velocities, combined with cfg_combine.
struct GuidedField {
  VelocityField cond;
  VelocityField uncond;
  double scale = 1.0;
};

/// Euler integration from x(0) = start over N uniform steps. Throws
/// NumericError naming the step if the state becomes non-finite.
Latent rf_integrate(const VelocityField& field, Latent start, int steps);

/// Starts from Latent::normal(shape, seed).
Latent rf_sample(const VelocityField& field, const LatentShape& shape, int steps, std::uint64_t seed);
Latent rf_sample(const GuidedField& field, const LatentShape& shape, int steps, std::uint64_t seed);

/// v(x, t) = (c - x) / (1 - t), with t clamped to 1 - 1e-6.
VelocityField point_target_field(Latent target);

}  // namespace drivedit::rfdit
