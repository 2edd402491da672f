#include "drivedit/rfdit/train.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "drivedit/compositor.hpp"
#include "drivedit/error.hpp"
#include "drivedit/fixtures.hpp"
#include "drivedit/guidance.hpp"
#include "drivedit/mesh.hpp"
#include "drivedit/parallel.hpp"
#include "drivedit/rasterizer.hpp"
#include "drivedit/rfdit/flow.hpp"
#include "drivedit/rng.hpp"

namespace drivedit::rfdit {

ToyFixture make_toy_fixture() {
  fixtures::SceneOptions opt;
  opt.width = 32;
  opt.height = 32;
  opt.frames = 4;
  const SceneBundle scene = fixtures::make_demo_scene(opt);

  BBox3D box;
  box.center = Vec3(7.0, 0.3, 0.8);
  box.size = Vec3(1.9, 4.4, 1.6);
  box.yaw = 0.3;
  box.id = "toy_car";
  const Mesh car = fixtures::make_toy_car_mesh();
  const AssetTransform transform = fit_mesh_to_box(car, box);

  const int V = static_cast<int>(scene.cameras.size());
  const int F = static_cast<int>(scene.frame_count());
  std::vector<std::vector<ObjectRender>> renders(V);
  for (int v = 0; v < V; ++v)
    for (int f = 0; f < F; ++f) renders[v].push_back(render_asset(car, transform, scene.cameras[v], f));
  const auto guidance = build_guidance(scene, renders, GuidanceParams{});

  ToyFixture fx;
  fx.target = Frames::zeros(V, F, opt.height, opt.width, 3);
  fx.mask = Matrix::Zero(fx.target.pixels.rows(), 3);
  for (auto& c : fx.conditions) c = Frames::zeros(V, F, opt.height, opt.width, 3);
  for (int v = 0; v < V; ++v) {
    for (int f = 0; f < F; ++f) {
      const DepthMap* depth = scene.has_depth(v) ? &scene.depth[v][f] : nullptr;
      store_image(fx.target, v, f, composite_naive(scene.frames[v][f], renders[v][f], depth, CompositeConfig{}));
      const GuidanceSet& g = guidance[v][f];
      store_image(fx.conditions[0], v, f, g.depth);
      store_image(fx.conditions[1], v, f, g.normal);
      store_mask(fx.conditions[2], v, f, g.edge);
      store_image(fx.conditions[3], v, f, g.object);
      store_mask(fx.conditions[4], v, f, g.mask);
      for (int y = 0; y < opt.height; ++y)
        for (int x = 0; x < opt.width; ++x) {
          const Index row = ((static_cast<Index>(v) * F + f) * opt.height + y) * opt.width + x;
          if (g.mask.at(x, y)) fx.mask.row(row).setOnes();
        }
    }
  }
  return fx;
}

void TrainConfig::validate() const {
  if (steps < 0) throw InputError("train: steps must be >= 0");
  if (!(std::isfinite(learning_rate) && learning_rate >= 0.0)) throw InputError("train: learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InputError("train: momentum must be in [0, 1)");
  if (pool_size < 1) throw InputError("train: pool_size must be >= 1");
  if (uncond_entries < 0 || uncond_entries > pool_size) throw InputError("train: uncond_entries outside [0, pool_size]");
  if (workers < 1) throw InputError("train: workers must be >= 1");
  weights.validate();
  model.validate();
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("train config must be an object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "steps") c.steps = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "optimizer") {
        const auto name = value.get<std::string>();
        if (name == "sgd") c.optimizer = Optimizer::sgd;
        else if (name == "momentum") c.optimizer = Optimizer::momentum;
        else throw InputError(fmt::format("train: unknown optimizer '{}'", name));
      } else if (key == "momentum") c.momentum = value.get<double>();
      else if (key == "pool_size") c.pool_size = value.get<int>();
      else if (key == "uncond_entries") c.uncond_entries = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "workers") c.workers = value.get<int>();
      else if (key == "model") c.model = ModelConfig::from_json(value);
      else if (key == "loss_weights") {
        for (const auto& [wk, wv] : value.items()) {
          if (wk == "diffusion") c.weights.diffusion = wv.get<double>();
          else if (wk == "mask") c.weights.mask = wv.get<double>();
          else if (wk == "lpips") c.weights.lpips = wv.get<double>();
          else throw InputError(fmt::format("train: unknown loss weight '{}'", wk));
        }
      } else {
        throw InputError(fmt::format("train: unknown key '{}'", key));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("train config: {}", e.what()));
  }
  c.validate();
  return c;
}

nlohmann::ordered_json TrainConfig::to_json() const {
  return nlohmann::ordered_json{
      {"steps", steps},
      {"learning_rate", learning_rate},
      {"optimizer", optimizer == Optimizer::sgd ? "sgd" : "momentum"},
      {"momentum", momentum},
      {"pool_size", pool_size},
      {"uncond_entries", uncond_entries},
      {"seed", seed},
      {"workers", workers},
      {"model", model.to_json()},
      {"loss_weights", {{"diffusion", weights.diffusion}, {"mask", weights.mask}, {"lpips", weights.lpips}}}};
}

TrainingData::TrainingData(const ToyFixture& fx, const TrainConfig& config)
    : shape(codec.latent_shape(fx.target)),
      z1(codec.encode(fx.target)),
      reference(codec.decode(z1)),
      mask(fx.mask) {
  for (std::size_t k = 0; k < conds.latents.size(); ++k) conds.latents[k] = codec.encode(fx.conditions[k]);
  for (int i = 0; i < config.pool_size; ++i) {
    Draw d;
    d.x0 = Latent::normal(shape, substream_seed(config.seed, fmt::format("toy/noise/{}", i)));
    std::mt19937_64 rng = make_engine(config.seed, fmt::format("toy/t/{}", i));
    d.t = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    d.drop = i >= config.pool_size - config.uncond_entries;
    pool.push_back(std::move(d));
  }
}

SampleResult evaluate_draw(const ToyModel& model, const TrainingData& data, const TrainingData::Draw& draw,
                           const LossWeights& weights, std::vector<Matrix>* grads) {
  Tape tape;
  const auto p = model.bind(tape, grads != nullptr);
  const FlowPair pair = rf_pair(draw.x0, data.z1, draw.t);
  const Var v_hat = model.forward(p, pair.x_t, draw.t, &data.conds, draw.drop);
  const Var l_diff = loss_diffusion(v_hat, tape.constant(pair.velocity.tokens));
  const Var x1_hat = add(tape.constant(pair.x_t.tokens), scale(v_hat, 1.0 - draw.t));
  const Var x_hat = data.codec.decode(x1_hat, data.shape);
  const Var ref = tape.constant(data.reference.pixels);
  const Var l_mask = loss_mask(x_hat, ref, data.mask);
  const Var l_lpips =
      data.perceptual.loss(x_hat, ref, data.reference.images(), data.reference.height, data.reference.width);
  const Var total = loss_total(l_diff, l_mask, l_lpips, weights);
  if (grads != nullptr) {
    tape.backward(total);
    tape.collect_slot_grads(*grads);
  }
  SampleResult r;
  r.parts = {l_diff.scalar(), l_mask.scalar(), l_lpips.scalar()};
  r.total = total.scalar();
  r.x_hat = data.reference;
  r.x_hat.pixels = x_hat.value();
  return r;
}

namespace {

std::vector<Matrix> zero_grads(const ToyModel& model) {
  std::vector<Matrix> g;
  for (const Parameter& p : model.parameters()) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

}  // namespace

StepLoss loss_and_gradient(const ToyModel& model, const TrainingData& data, const LossWeights& weights, int workers,
                           std::vector<Matrix>* grads) {
  const std::size_t n = data.pool.size();
  std::vector<SampleResult> results(n);
  std::vector<std::vector<Matrix>> per(grads ? n : 0);
  parallel_for(n, workers, [&](std::size_t i) {
    if (grads) per[i] = zero_grads(model);
    results[i] = evaluate_draw(model, data, data.pool[i], weights, grads ? &per[i] : nullptr);
  });

  StepLoss out;
  for (const SampleResult& r : results) {
    out.parts.diffusion += r.parts.diffusion;
    out.parts.mask += r.parts.mask;
    out.parts.lpips += r.parts.lpips;
    out.total += r.total;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.parts = {out.parts.diffusion * inv, out.parts.mask * inv, out.parts.lpips * inv};
  out.total *= inv;

  if (grads) {
    for (std::size_t stride = 1; stride < n; stride *= 2) {
      for (std::size_t i = 0; i + stride < n; i += 2 * stride) {
        for (std::size_t k = 0; k < per[i].size(); ++k) per[i][k] += per[i + stride][k];
      }
    }
    *grads = std::move(per[0]);
    for (Matrix& g : *grads) g *= inv;
  }
  return out;
}

double masked_psnr(const ToyModel& model, const TrainingData& data) {
  double sq = 0.0;
  double count = 0.0;
  for (const auto& draw : data.pool) {
    const SampleResult r = evaluate_draw(model, data, draw, LossWeights{}, nullptr);
    // [-1, 1] -> [0, 1] halves differences.
    const Matrix d = (r.x_hat.pixels - data.reference.pixels).cwiseProduct(data.mask) * 0.5;
    sq += d.squaredNorm();
    count += data.mask.sum();
  }
  if (count == 0.0) throw InputError("masked_psnr: empty mask");
  const double mse = sq / count;
  return mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
}

TrainResult train_toy(ToyModel& model, const TrainingData& data, const TrainConfig& config) {
  config.validate();
  TrainResult result;
  std::vector<Matrix> velocity = zero_grads(model);
  std::vector<Matrix> grads;
  auto check = [](const StepLoss& s) {
    if (!std::isfinite(s.total) || s.total > 1e6) {
      throw NumericError(fmt::format("training diverged at step {} (loss {})", s.step, s.total));
    }
  };
  for (int step = 0; step < config.steps; ++step) {
    StepLoss s = loss_and_gradient(model, data, config.weights, config.workers, &grads);
    s.step = step;
    check(s);
    result.curve.push_back(s);
    auto& params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (config.optimizer == Optimizer::momentum) {
        velocity[k] = config.momentum * velocity[k] + grads[k];
        params[k].value -= config.learning_rate * velocity[k];
      } else {
        params[k].value -= config.learning_rate * grads[k];
      }
    }
  }
  StepLoss last = loss_and_gradient(model, data, config.weights, config.workers, nullptr);
  last.step = config.steps;
  check(last);
  result.curve.push_back(last);
  result.masked_psnr_db = masked_psnr(model, data);
  return result;
}

void write_loss_csv(const std::vector<StepLoss>& curve, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(fmt::format("cannot write {}", path.string()));
  os << "step,loss_diffusion,loss_mask,loss_lpips,loss_total\n";
  for (const StepLoss& s : curve) {
    os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.step, s.parts.diffusion, s.parts.mask, s.parts.lpips,
                      s.total);
  }
}

Latent sample_model(const ToyModel& model, const ConditionSet& conds, const LatentShape& shape, int steps,
                    double guidance_scale, std::uint64_t seed) {
  conds.validate(shape);
  GuidedField field;
  field.cond = [&](const Latent& x, double t) { return model.predict(x, t, &conds, false); };
  field.uncond = [&](const Latent& x, double t) { return model.predict(x, t, &conds, true); };
  field.scale = guidance_scale;
  return rf_sample(field, shape, steps, seed);
}

}  // namespace drivedit::rfdit
