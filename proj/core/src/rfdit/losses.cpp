#include "drivedit/rfdit/losses.hpp"

#include <cmath>
#include <random>

#include "drivedit/error.hpp"

namespace drivedit::rfdit {

void LossWeights::validate() const {
  for (double w : {diffusion, mask, lpips}) {
    if (!(std::isfinite(w) && w >= 0.0)) throw InputError("loss weights must be finite and >= 0");
  }
}

double loss_total(const LossParts& p, const LossWeights& w) {
  return w.diffusion * p.diffusion + w.mask * p.mask + w.lpips * p.lpips;
}

Var loss_total(const Var& diffusion, const Var& mask, const Var& lpips, const LossWeights& w) {
  return add(add(scale(diffusion, w.diffusion), scale(mask, w.mask)), scale(lpips, w.lpips));
}

Var loss_diffusion(const Var& pred, const Var& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw InputError("loss_diffusion: shape mismatch");
  return scale(sum_squares(sub(pred, target)), 1.0 / static_cast<double>(pred.value().size()));
}

double loss_diffusion(const Matrix& pred, const Matrix& target) {
  Tape t;
  return loss_diffusion(t.constant(pred), t.constant(target)).scalar();
}

Var loss_mask(const Var& x_hat, const Var& x, const Matrix& mask) {
  if (x_hat.rows() != x.rows() || x_hat.cols() != x.cols() || mask.rows() != x.rows() || mask.cols() != x.cols()) {
    throw InputError("loss_mask: shape mismatch");
  }
  Tape& t = x_hat.tape();
  const Var masked = mul(sub(x_hat, x), t.constant(mask));
  return scale(sum_squares(masked), 1.0 / (mask.sum() + kMaskEps));
}

double loss_mask(const Matrix& x_hat, const Matrix& x, const Matrix& mask) {
  Tape t;
  return loss_mask(t.constant(x_hat), t.constant(x), mask).scalar();
}

PerceptualNet::PerceptualNet(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int l = 0; l < 3; ++l) {
    const int fan_in = 9 * kChannels[l];
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    weights_[l].resize(fan_in, kChannels[l + 1]);
    for (Index i = 0; i < weights_[l].size(); ++i) weights_[l].data()[i] = dist(rng);
    biases_[l].resize(1, kChannels[l + 1]);
    for (Index i = 0; i < biases_[l].size(); ++i) biases_[l].data()[i] = 0.1 * dist(rng);
  }
}

namespace {

// im2col for a 3x3 stride-2 pad-1 convolution; -1 marks zero padding.
std::shared_ptr<const std::vector<std::int64_t>> im2col_index(int count, int h, int w, int c, int ho, int wo) {
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(static_cast<std::size_t>(count) * ho * wo * 9 * c);
  for (int n = 0; n < count; ++n)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx)
            for (int ci = 0; ci < c; ++ci) {
              const int y = 2 * oy + ky - 1, x = 2 * ox + kx - 1;
              if (y < 0 || y >= h || x < 0 || x >= w) {
                idx->push_back(-1);
              } else {
                idx->push_back(((static_cast<std::int64_t>(n) * h + y) * w + x) * c + ci);
              }
            }
  return idx;
}

}  // namespace

std::vector<Var> PerceptualNet::features(const Var& images, int count, int height, int width) const {
  Tape& t = images.tape();
  std::vector<Var> out;
  Var cur = images;
  int h = height, w = width;
  for (int l = 0; l < 3; ++l) {
    const int ho = (h + 1) / 2, wo = (w + 1) / 2;
    const Var cols = gather(cur, static_cast<Index>(count) * ho * wo, 9 * kChannels[l],
                            im2col_index(count, h, w, kChannels[l], ho, wo));
    cur = tanh(linear(cols, t.constant(weights_[l]), t.constant(biases_[l])));
    out.push_back(cur);
    h = ho;
    w = wo;
  }
  return out;
}

Var PerceptualNet::loss(const Var& x_hat, const Var& x, int images, int height, int width) const {
  if (x_hat.rows() != x.rows() || x_hat.cols() != 3 || x.cols() != 3) throw InputError("loss_perceptual: shape mismatch");
  const auto fa = features(x_hat, images, height, width);
  const auto fb = features(x, images, height, width);
  Var total;
  for (std::size_t l = 0; l < fa.size(); ++l) {
    const Var d = sub(normalize_rows(fa[l]), normalize_rows(fb[l]));
    const Var term = scale(sum_squares(d), 1.0 / (3.0 * static_cast<double>(d.value().size())));
    total = total.valid() ? add(total, term) : term;
  }
  return total;
}

double PerceptualNet::loss(const Frames& x_hat, const Frames& x) const {
  if (x_hat.height != x.height || x_hat.width != x.width || x_hat.images() != x.images()) {
    throw InputError("loss_perceptual: shape mismatch");
  }
  Tape t;
  return loss(t.constant(x_hat.pixels), t.constant(x.pixels), x.images(), x.height, x.width).scalar();
}

}  // namespace drivedit::rfdit
