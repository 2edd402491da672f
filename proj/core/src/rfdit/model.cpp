#include "drivedit/rfdit/model.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "drivedit/error.hpp"

namespace drivedit::rfdit {

void ConditionSet::validate(const LatentShape& shape) const {
  for (std::size_t k = 0; k < latents.size(); ++k) {
    if (!(latents[k].shape == shape) || latents[k].tokens.rows() != shape.tokens() ||
        latents[k].tokens.cols() != shape.channels) {
      throw InputError(fmt::format("condition '{}' shape mismatch", kNames[k]));
    }
  }
}

void ModelConfig::validate() const {
  if (latent_channels < 1 || width < 1 || heads < 1 || mlp_hidden < 1 || embed_dim < 1 || fusion_hidden < 1 ||
      time_features < 2 || base_blocks < 1) {
    throw InputError("model config: sizes must be positive");
  }
  if (width % heads != 0) throw InputError("model config: width must be a multiple of heads");
  if (time_features % 2 != 0) throw InputError("model config: time_features must be even");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  return nlohmann::ordered_json{{"latent_channels", latent_channels}, {"width", width},
                                {"heads", heads},
                                {"mlp_hidden", mlp_hidden},
                                {"embed_dim", embed_dim},
                                {"fusion_hidden", fusion_hidden},
                                {"time_features", time_features},
                                {"base_blocks", base_blocks},
                                {"view_attention", view_attention}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (!j.is_object()) throw InputError("model config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "latent_channels") c.latent_channels = value.get<int>();
    else if (key == "width") c.width = value.get<int>();
    else if (key == "heads") c.heads = value.get<int>();
    else if (key == "mlp_hidden") c.mlp_hidden = value.get<int>();
    else if (key == "embed_dim") c.embed_dim = value.get<int>();
    else if (key == "fusion_hidden") c.fusion_hidden = value.get<int>();
    else if (key == "time_features") c.time_features = value.get<int>();
    else if (key == "base_blocks") c.base_blocks = value.get<int>();
    else if (key == "view_attention") c.view_attention = value.get<bool>();
    else throw InputError(fmt::format("model config: unknown key '{}'", key));
  }
  c.validate();
  return c;
}

Matrix timestep_features(double t, int dim) {
  const int half = dim / 2;
  Matrix out(1, dim);
  const double s = t * 1000.0;
  for (int i = 0; i < half; ++i) {
    const double f = std::exp(-std::log(10000.0) * i / half);
    out(0, i) = std::cos(f * s);
    out(0, half + i) = std::sin(f * s);
  }
  return out;
}

Matrix positional_embedding(const LatentShape& shape, int width) {
  // Channel budget split over (frame, y, x); each part is half cos, half sin.
  const int part = (width / 3) & ~1;
  const std::array<int, 3> dims = {width - 2 * part, part, part};
  Matrix out = Matrix::Zero(shape.tokens(), width);
  for (int v = 0; v < shape.views; ++v)
    for (int f = 0; f < shape.frames; ++f)
      for (int y = 0; y < shape.height; ++y)
        for (int x = 0; x < shape.width; ++x) {
          const Index row = ((static_cast<Index>(v) * shape.frames + f) * shape.height + y) * shape.width + x;
          const std::array<int, 3> coord = {f, y, x};
          int offset = 0;
          for (int a = 0; a < 3; ++a) {
            const int half = dims[a] / 2;
            for (int i = 0; i < half; ++i) {
              const double freq = std::exp(-std::log(100.0) * i / std::max(half, 1));
              out(row, offset + i) = std::cos(freq * coord[a]);
              out(row, offset + half + i) = std::sin(freq * coord[a]);
            }
            offset += dims[a];
          }
        }
  return out;
}

struct ToyModel::Layout {
  std::shared_ptr<const std::vector<std::vector<Index>>> per_view;
  std::shared_ptr<const std::vector<std::vector<Index>>> across_views;
  Matrix pos;

  Layout(const LatentShape& s, int width) : pos(positional_embedding(s, width)) {
    const Index per = static_cast<Index>(s.frames) * s.height * s.width;
    auto pv = std::make_shared<std::vector<std::vector<Index>>>(s.views);
    auto av = std::make_shared<std::vector<std::vector<Index>>>(per);
    for (int v = 0; v < s.views; ++v) {
      for (Index i = 0; i < per; ++i) {
        (*pv)[v].push_back(v * per + i);
        (*av)[i].push_back(v * per + i);
      }
    }
    per_view = pv;
    across_views = av;
  }
};

void ToyModel::add_param(std::string name, Index rows, Index cols, int fan_in) {
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), Matrix::Zero(rows, cols), fan_in});
}

ToyModel::ToyModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const int C = config_.latent_channels, D = config_.width, E = config_.embed_dim;
  const int TF = config_.time_features, H = config_.mlp_hidden, FH = config_.fusion_hidden;

  auto linear_params = [&](const std::string& name, int in, int out) {
    add_param(name + ".w", in, out, in);
    add_param(name + ".b", 1, out, in);
  };
  auto block_params = [&](const std::string& name) {
    linear_params(name + ".ada", D, 6 * D);
    linear_params(name + ".qkv", D, 3 * D);
    linear_params(name + ".proj", D, D);
    linear_params(name + ".fc1", D, H);
    linear_params(name + ".fc2", H, D);
  };

  linear_params("x_embed", C, D);
  linear_params("time.fc1", TF, D);
  linear_params("time.fc2", D, D);
  for (const char* k : ConditionSet::kNames) linear_params(fmt::format("embed.{}", k), C, E);
  linear_params("fusion.fc1", 5 * E, FH);
  linear_params("fusion.fc2", FH, D);
  add_param("uncond", 1, D, D);
  block_params("control");
  linear_params("control.out", D, D);
  for (int b = 0; b < config_.base_blocks; ++b) block_params(fmt::format("base{}", b));
  linear_params("view.qkv", D, 3 * D);
  linear_params("view.out", D, D);
  linear_params("final.ada", D, 2 * D);
  linear_params("final.out", D, C);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Parameter& p : params_) {
    const bool is_bias = p.name.size() > 2 && p.name.ends_with(".b");
    const bool zero_init = p.name.starts_with("control.out.") || p.name.starts_with("view.out.");
    if (is_bias || zero_init) continue;
    const double std = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
    for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = std * normal(rng);
  }
  // Gates open at initialization; modulation otherwise starts from the identity.
  for (Parameter& p : params_) {
    if (!p.name.ends_with(".ada.b") || p.name.starts_with("final.")) continue;
    p.value.middleCols(2 * D, D).setOnes();
    p.value.middleCols(5 * D, D).setOnes();
  }
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::size_t ToyModel::parameter_index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError(fmt::format("unknown parameter '{}'", name));
  return it->second;
}

void ToyModel::randomize_all(std::uint64_t seed, double gain) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Parameter& p : params_) {
    const double std = gain / std::sqrt(static_cast<double>(p.fan_in));
    for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = std * normal(rng);
  }
}

bool ToyModel::all_finite() const {
  for (const Parameter& p : params_) {
    if (!p.value.allFinite()) return false;
  }
  return true;
}

std::vector<Var> ToyModel::bind(Tape& tape, bool trainable) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back(trainable ? tape.leaf(params_[i].value, static_cast<int>(i)) : tape.constant(params_[i].value));
  }
  return out;
}

const Var& ToyModel::param(const std::vector<Var>& p, const std::string& name) const {
  return p[parameter_index(name)];
}

Var ToyModel::modulate(const Var& h, const Var& shift, const Var& scale_row) const {
  Tape& t = h.tape();
  const Var one_plus = add(scale_row, t.constant(Matrix::Ones(1, scale_row.cols())));
  return add_row(mul_row(layer_norm(h), one_plus), shift);
}

Var ToyModel::block(const std::vector<Var>& p, const std::string& pre, const Var& h, const Var& c,
                    const Layout& layout) const {
  const Index D = config_.width;
  auto lin = [&](const Var& x, const std::string& name) {
    return linear(x, param(p, pre + "." + name + ".w"), param(p, pre + "." + name + ".b"));
  };
  const Var mod = lin(c, "ada");
  auto chunk = [&](int i) { return slice_cols(mod, i * D, D); };

  const Var a_in = modulate(h, chunk(0), chunk(1));
  const Var qkv = lin(a_in, "qkv");
  const Var attn = grouped_attention(slice_cols(qkv, 0, D), slice_cols(qkv, D, D), slice_cols(qkv, 2 * D, D),
                                     config_.heads, layout.per_view);
  const Var h1 = add(h, mul_row(lin(attn, "proj"), chunk(2)));

  const Var m_in = modulate(h1, chunk(3), chunk(4));
  const Var mlp = lin(gelu(lin(m_in, "fc1")), "fc2");
  return add(h1, mul_row(mlp, chunk(5)));
}

Var ToyModel::fuse_conditions(const std::vector<Var>& p, const ConditionSet& conds) const {
  Tape& t = p.front().tape();
  std::vector<Var> parts;
  for (std::size_t k = 0; k < conds.latents.size(); ++k) {
    const std::string name = fmt::format("embed.{}", ConditionSet::kNames[k]);
    parts.push_back(linear(t.constant(conds.latents[k].tokens), param(p, name + ".w"), param(p, name + ".b")));
  }
  const Var cat = concat_cols(parts);
  const Var h = gelu(linear(cat, param(p, "fusion.fc1.w"), param(p, "fusion.fc1.b")));
  return linear(h, param(p, "fusion.fc2.w"), param(p, "fusion.fc2.b"));
}

Matrix ToyModel::fuse_conditions(const ConditionSet& conds) const {
  conds.validate(conds.latents[0].shape);
  Tape t;
  return fuse_conditions(bind(t, false), conds).value();
}

Var ToyModel::forward(const std::vector<Var>& p, const Latent& x_t, double t_flow, const ConditionSet* conds,
                      bool drop_condition) const {
  const LatentShape& s = x_t.shape;
  if (s.channels != config_.latent_channels) throw InputError("model: latent channel mismatch");
  Tape& t = p.front().tape();
  const Layout layout(s, config_.width);
  const Index N = s.tokens();

  Var h = add(linear(t.constant(x_t.tokens), param(p, "x_embed.w"), param(p, "x_embed.b")), t.constant(layout.pos));

  const Var tf = t.constant(timestep_features(t_flow, config_.time_features));
  const Var temb = linear(silu(linear(tf, param(p, "time.fc1.w"), param(p, "time.fc1.b"))), param(p, "time.fc2.w"),
                          param(p, "time.fc2.b"));
  const Var c = silu(temb);

  Var fused;
  if (drop_condition || conds == nullptr) {
    fused = broadcast_rows(param(p, "uncond"), N);
  } else {
    conds->validate(s);
    fused = fuse_conditions(p, *conds);
  }
  const Var control = block(p, "control", add(h, fused), c, layout);
  h = add(h, linear(control, param(p, "control.out.w"), param(p, "control.out.b")));

  for (int b = 0; b < config_.base_blocks; ++b) {
    h = block(p, fmt::format("base{}", b), h, c, layout);
    if (b == 0 && config_.view_attention) {
      const Index D = config_.width;
      const Var qkv = linear(layer_norm(h), param(p, "view.qkv.w"), param(p, "view.qkv.b"));
      const Var attn = grouped_attention(slice_cols(qkv, 0, D), slice_cols(qkv, D, D), slice_cols(qkv, 2 * D, D),
                                         config_.heads, layout.across_views);
      h = add(h, linear(attn, param(p, "view.out.w"), param(p, "view.out.b")));
    }
  }

  const Var fmod = linear(c, param(p, "final.ada.w"), param(p, "final.ada.b"));
  const Index D = config_.width;
  const Var out_in = modulate(h, slice_cols(fmod, 0, D), slice_cols(fmod, D, D));
  return linear(out_in, param(p, "final.out.w"), param(p, "final.out.b"));
}

Latent ToyModel::predict(const Latent& x_t, double t, const ConditionSet* conds, bool drop_condition) const {
  Tape tape;
  const auto p = bind(tape, false);
  return Latent{x_t.shape, forward(p, x_t, t, conds, drop_condition).value()};
}

}  // namespace drivedit::rfdit
