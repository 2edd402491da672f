#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "drivedit/rfdit/latent.hpp"

namespace drivedit::rfdit {

/// Encoded guidance latents in the order depth, normal, edge, object, mask.
struct ConditionSet {
  static constexpr std::array<const char*, 5> kNames = {"depth", "normal", "edge", "object", "mask"};
  std::array<Latent, 5> latents;

  /// Throws InputError unless all five share `shape`.
  void validate(const LatentShape& shape) const;
};

struct ModelConfig {
  int latent_channels = 4;
  int width = 64;
  int heads = 4;
  int mlp_hidden = 128;
  int embed_dim = 16;  // per-condition embedder output
  int fusion_hidden = 64;
  int time_features = 64;
  int base_blocks = 2;
  bool view_attention = true;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Parameter {
  std::string name;
  Matrix value;
  int fan_in = 1;
};

/// Toy diffusion transformer predicting rectified-flow velocity on latent
/// tokens. Tokens are ordered (view, frame, y, x). Per-view blocks attend
/// over all (frame, y, x) tokens of one view; the view-attention block
/// attends across views at a fixed (frame, y, x). There is no view
/// embedding, so the network is equivariant to view permutations.
class ToyModel {
 public:
  ToyModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  /// Index into parameters(); throws InputError for unknown names.
  std::size_t parameter_index(const std::string& name) const;

  /// Overwrites every parameter, including zero-initialized projections,
  /// with seeded normal values. Used to make every gradient path non-trivial.
  void randomize_all(std::uint64_t seed, double gain = 1.0);
  bool all_finite() const;

  /// Tape leaves (slot = parameter index) or constants for every parameter.
  std::vector<Var> bind(Tape& tape, bool trainable) const;

  /// FusionNet output, tokens x width.
  Var fuse_conditions(const std::vector<Var>& p, const ConditionSet& conds) const;
  Matrix fuse_conditions(const ConditionSet& conds) const;

  /// Velocity prediction, tokens x latent_channels. With drop_condition or
  /// conds == nullptr the learned unconditional embedding replaces the fused tokens.
  Var forward(const std::vector<Var>& p, const Latent& x_t, double t, const ConditionSet* conds,
              bool drop_condition) const;
  Latent predict(const Latent& x_t, double t, const ConditionSet* conds, bool drop_condition) const;

 private:
  struct Layout;
  Var block(const std::vector<Var>& p, const std::string& prefix, const Var& h, const Var& c,
            const Layout& layout) const;
  Var modulate(const Var& h, const Var& shift, const Var& scale) const;
  const Var& param(const std::vector<Var>& p, const std::string& name) const;
  void add_param(std::string name, Index rows, Index cols, int fan_in);

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Sinusoidal features of t * 1000: [cos(f_i s), sin(f_i s)], f_i = 10000^(-i / (dim/2)).
Matrix timestep_features(double t, int dim);
/// Fixed sin-cos embedding of (frame, y, x) per token; identical across views.
Matrix positional_embedding(const LatentShape& shape, int width);

}  // namespace drivedit::rfdit
