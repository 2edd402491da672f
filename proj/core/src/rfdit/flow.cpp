#include "drivedit/rfdit/flow.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "drivedit/error.hpp"

namespace drivedit::rfdit {

FlowPair rf_pair(const Latent& x0, const Latent& x1, double t) {
  if (!(x0.shape == x1.shape)) throw InputError("rf_pair: shape mismatch");
  return FlowPair{Latent{x0.shape, (1.0 - t) * x0.tokens + t * x1.tokens}, Latent{x0.shape, x1.tokens - x0.tokens}};
}

Latent cfg_combine(const Latent& v_uncond, const Latent& v_cond, double w) {
  if (!(v_uncond.shape == v_cond.shape)) throw InputError("cfg_combine: shape mismatch");
  if (w == 1.0) return v_cond;
  if (w == 0.0) return v_uncond;
  return Latent{v_cond.shape, v_uncond.tokens + w * (v_cond.tokens - v_uncond.tokens)};
}

Latent rf_integrate(const VelocityField& field, Latent x, int steps) {
  if (steps < 1) throw InputError("rf_sample: steps must be >= 1");
  const double dt = 1.0 / steps;
  for (int i = 0; i < steps; ++i) {
    const Latent v = field(x, i * dt);
    if (!(v.shape == x.shape)) throw InputError("rf_sample: velocity shape mismatch");
    x.tokens += dt * v.tokens;
    if (!x.all_finite()) throw NumericError(fmt::format("rf_sample: non-finite state at step {}", i));
  }
  return x;
}

Latent rf_sample(const VelocityField& field, const LatentShape& shape, int steps, std::uint64_t seed) {
  return rf_integrate(field, Latent::normal(shape, seed), steps);
}

Latent rf_sample(const GuidedField& g, const LatentShape& shape, int steps, std::uint64_t seed) {
  VelocityField combined = [&g](const Latent& x, double t) {
    if (g.scale == 1.0) return g.cond(x, t);
    if (g.scale == 0.0) return g.uncond(x, t);
    return cfg_combine(g.uncond(x, t), g.cond(x, t), g.scale);
  };
  return rf_sample(combined, shape, steps, seed);
}

VelocityField point_target_field(Latent target) {
  return [c = std::move(target)](const Latent& x, double t) {
    const double tc = std::min(t, 1.0 - 1e-6);
    return Latent{x.shape, (c.tokens - x.tokens) / (1.0 - tc)};
  };
}

}  // namespace drivedit::rfdit
