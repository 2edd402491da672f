#include "drivedit/rfdit/schedule.hpp"

#include <cmath>

#include <fmt/format.h>

#include "drivedit/error.hpp"

namespace drivedit::rfdit {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw InputError("schedule: no steps");
  double prod = 1.0;
  alpha_bars_.reserve(betas_.size());
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double b = betas_[i];
    if (!(b >= 0.0 && b < 1.0)) throw InputError(fmt::format("schedule: beta_{} = {} outside [0, 1)", i + 1, b));
    prod *= 1.0 - b;
    alpha_bars_.push_back(prod);
  }
}

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double beta_start, double beta_end) {
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double a = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + a * (beta_end - beta_start);
  }
  return NoiseSchedule(std::move(betas));
}

double NoiseSchedule::alpha_bar(std::size_t t) const {
  if (t < 1 || t > steps()) throw InputError(fmt::format("schedule: step {} outside [1, {}]", t, steps()));
  return alpha_bars_[t - 1];
}

Latent forward_noising(const Latent& z0, std::size_t t, const NoiseSchedule& schedule, const Latent& noise) {
  if (!(z0.shape == noise.shape)) throw InputError("forward_noising: shape mismatch");
  const double ab = schedule.alpha_bar(t);
  return Latent{z0.shape, std::sqrt(ab) * z0.tokens + std::sqrt(1.0 - ab) * noise.tokens};
}

}  // namespace drivedit::rfdit
