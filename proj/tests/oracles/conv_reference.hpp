#pragma once

// Direct-convolution reference for the perceptual loss: explicit loops over
// output pixels, kernel taps and channels, no im2col and no autodiff.

#include <cmath>
#include <vector>

#include "drivedit/rfdit/losses.hpp"

namespace oracle {

struct FeatureMap {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<double> v;  // (n, y, x, c)
  double& at(int i, int y, int x, int k) { return v[((static_cast<std::size_t>(i) * h + y) * w + x) * c + k]; }
  double at(int i, int y, int x, int k) const {
    return v[((static_cast<std::size_t>(i) * h + y) * w + x) * c + k];
  }
};

inline FeatureMap conv_layer(const FeatureMap& in, const drivedit::rfdit::Matrix& weight,
                             const drivedit::rfdit::Matrix& bias) {
  FeatureMap out;
  out.n = in.n;
  out.h = (in.h + 1) / 2;
  out.w = (in.w + 1) / 2;
  out.c = static_cast<int>(weight.cols());
  out.v.assign(static_cast<std::size_t>(out.n) * out.h * out.w * out.c, 0.0);
  for (int i = 0; i < in.n; ++i)
    for (int oy = 0; oy < out.h; ++oy)
      for (int ox = 0; ox < out.w; ++ox)
        for (int co = 0; co < out.c; ++co) {
          double s = bias(0, co);
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int y = 2 * oy + ky - 1, x = 2 * ox + kx - 1;
              if (y < 0 || x < 0 || y >= in.h || x >= in.w) continue;
              for (int ci = 0; ci < in.c; ++ci) s += in.at(i, y, x, ci) * weight((ky * 3 + kx) * in.c + ci, co);
            }
          out.at(i, oy, ox, co) = std::tanh(s);
        }
  return out;
}

inline double perceptual_reference(const drivedit::rfdit::PerceptualNet& net, const drivedit::rfdit::Frames& a,
                                   const drivedit::rfdit::Frames& b) {
  auto to_map = [](const drivedit::rfdit::Frames& f) {
    FeatureMap m{f.images(), f.height, f.width, 3, {}};
    m.v.assign(f.pixels.data(), f.pixels.data() + f.pixels.size());
    return m;
  };
  FeatureMap fa = to_map(a), fb = to_map(b);
  double total = 0.0;
  for (int l = 0; l < 3; ++l) {
    fa = conv_layer(fa, net.weight(l), net.bias(l));
    fb = conv_layer(fb, net.weight(l), net.bias(l));
    double sum = 0.0;
    const std::size_t locations = fa.v.size() / fa.c;
    for (std::size_t p = 0; p < locations; ++p) {
      double na = 0.0, nb = 0.0;
      for (int k = 0; k < fa.c; ++k) {
        na += fa.v[p * fa.c + k] * fa.v[p * fa.c + k];
        nb += fb.v[p * fb.c + k] * fb.v[p * fb.c + k];
      }
      na = std::sqrt(na + 1e-10);
      nb = std::sqrt(nb + 1e-10);
      for (int k = 0; k < fa.c; ++k) {
        const double d = fa.v[p * fa.c + k] / na - fb.v[p * fb.c + k] / nb;
        sum += d * d;
      }
    }
    total += sum / static_cast<double>(fa.v.size());
  }
  return total / 3.0;
}

}  // namespace oracle
