#pragma once

#include <cstddef>
#include <vector>

#include "drivedit/rfdit/latent.hpp"

namespace drivedit::rfdit {

class NoiseSchedule {
 public:
  /// Throws InputError unless every beta lies in [0, 1).
  explicit NoiseSchedule(std::vector<double> betas);
  static NoiseSchedule linear(std::size_t steps, double beta_start = 1e-4, double beta_end = 0.02);

  std::size_t steps() const { return betas_.size(); }
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }
  /// 1-based step index.
  double alpha_bar(std::size_t t) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

/// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) noise. Throws InputError for t
/// outside [1, T] or mismatched shapes.
Latent forward_noising(const Latent& z0, std::size_t t, const NoiseSchedule& schedule, const Latent& noise);

}  // namespace drivedit::rfdit
