#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drivedit/rfdit/codec.hpp"
#include "drivedit/rfdit/losses.hpp"
#include "drivedit/rfdit/model.hpp"

namespace drivedit::rfdit {

/// Stereo 32x32 scene with 4 frames and a toy car at a fixed box: guidance
/// maps as conditions and the naive composite as the target.
struct ToyFixture {
  Frames target;                    // 3 channels in [-1, 1]
  Matrix mask;                      // same layout as target.pixels, 0/1
  std::array<Frames, 5> conditions; // D, N, E, O, M as 3-channel images
};

ToyFixture make_toy_fixture();

enum class Optimizer { sgd, momentum };

struct TrainConfig {
  int steps = 2000;
  double learning_rate = 0.01;
  Optimizer optimizer = Optimizer::momentum;
  double momentum = 0.9;
  /// Fixed (noise, t, drop) draws reused every step.
  int pool_size = 4;
  /// The last `uncond_entries` pool draws drop the conditions.
  int uncond_entries = 1;
  LossWeights weights;
  ModelConfig model;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
  /// Unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

struct StepLoss {
  int step = 0;
  LossParts parts;
  double total = 0.0;
};

/// Everything a training step needs, precomputed once from the fixture.
struct TrainingData {
  LatentCodec codec;          // default seed: frozen across runs
  PerceptualNet perceptual;   // default seed: frozen across runs
  LatentShape shape;
  Latent z1;            // encoded target
  Frames reference;     // decode(z1)
  Matrix mask;
  ConditionSet conds;
  struct Draw {
    Latent x0;
    double t = 0.0;
    bool drop = false;
  };
  std::vector<Draw> pool;

  TrainingData(const ToyFixture& fixture, const TrainConfig& config);
};

struct SampleResult {
  LossParts parts;
  double total = 0.0;
  Frames x_hat;  // decoded one-step estimate of the data point
};

/// Loss of one pool draw; adds the parameter gradients into `grads` when non-null.
SampleResult evaluate_draw(const ToyModel& model, const TrainingData& data, const TrainingData::Draw& draw,
                           const LossWeights& weights, std::vector<Matrix>* grads);

/// Pool-mean loss and gradient. Per-draw gradients are summed by a fixed
/// pairwise tree, so the result does not depend on `workers`.
StepLoss loss_and_gradient(const ToyModel& model, const TrainingData& data, const LossWeights& weights, int workers,
                           std::vector<Matrix>* grads);

/// PSNR (dB, [0, 1] intensity scale) of the one-step estimates against the
/// decoded target inside the mask, pooled over all draws.
double masked_psnr(const ToyModel& model, const TrainingData& data);

struct TrainResult {
  std::vector<StepLoss> curve;  // step 0 .. steps (losses before each update, then final)
  double masked_psnr_db = 0.0;
};

/// Full-batch descent over the pool. Throws NumericError if the loss exceeds
/// 1e6 or becomes non-finite.
TrainResult train_toy(ToyModel& model, const TrainingData& data, const TrainConfig& config);

void write_loss_csv(const std::vector<StepLoss>& curve, const std::filesystem::path& path);

/// Guided Euler sampling with the model: cfg_combine(uncond, cond, w).
Latent sample_model(const ToyModel& model, const ConditionSet& conds, const LatentShape& shape, int steps,
                    double guidance_scale, std::uint64_t seed);

}  // namespace drivedit::rfdit
