#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "drivedit/rfdit/checkpoint.hpp"
#include "drivedit/rfdit/model.hpp"
#include "support/helpers.hpp"

using namespace drivedit;
using namespace drivedit::rfdit;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.width = 16;
  c.heads = 2;
  c.mlp_hidden = 24;
  c.embed_dim = 6;
  c.fusion_hidden = 12;
  c.time_features = 8;
  return c;
}

ConditionSet random_conds(const LatentShape& s, std::uint64_t seed) {
  ConditionSet c;
  for (std::size_t k = 0; k < 5; ++k) c.latents[k] = Latent::normal(s, seed + k);
  return c;
}

// Reorders the view axis of a token matrix: out view i = in view perm[i].
Matrix permute_views(const Matrix& tokens, const LatentShape& s, const std::vector<int>& perm) {
  const Index per_view = s.tokens() / s.views;
  Matrix out(tokens.rows(), tokens.cols());
  for (int v = 0; v < s.views; ++v) out.middleRows(v * per_view, per_view) = tokens.middleRows(perm[v] * per_view, per_view);
  return out;
}

double gelu_grad(double x) {
  const double c = std::sqrt(2.0 / M_PI);
  const double u = c * (x + 0.044715 * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1 + th) + 0.5 * x * (1 - th * th) * c * (1 + 3 * 0.044715 * x * x);
}

double gelu(double x) { return 0.5 * x * (1 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x))); }

const Matrix& param(const ToyModel& m, const std::string& name) {
  return m.parameters()[m.parameter_index(name)].value;
}

}  // namespace

TEST(ModelConfig, JsonRoundTripAndValidation) {
  const ModelConfig c = small_config();
  EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
  auto j = c.to_json();
  j["depth"] = 3;
  EXPECT_THROW(ModelConfig::from_json(j), InputError);
  ModelConfig bad = c;
  bad.heads = 3;
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(ToyModel, ParameterCountMatchesFormula) {
  const ModelConfig c;
  const ToyModel m(c, 1);
  const std::size_t D = c.width, C = c.latent_channels, E = c.embed_dim, TF = c.time_features, H = c.mlp_hidden,
                    FH = c.fusion_hidden;
  auto lin = [](std::size_t in, std::size_t out) { return in * out + out; };
  const std::size_t block = lin(D, 6 * D) + lin(D, 3 * D) + lin(D, D) + lin(D, H) + lin(H, D);
  const std::size_t expected = lin(C, D) + lin(TF, D) + lin(D, D) + 5 * lin(C, E) + lin(5 * E, FH) + lin(FH, D) + D +
                               block + lin(D, D) + c.base_blocks * block + lin(D, 3 * D) + lin(D, D) + lin(D, 2 * D) +
                               lin(D, C);
  EXPECT_EQ(m.parameter_count(), expected);
  EXPECT_EQ(ToyModel(c, 99).parameter_count(), expected);
  EXPECT_THROW(m.parameter_index("nope"), InputError);
}

TEST(ToyModel, InitializationRules) {
  const ModelConfig c = small_config();
  const ToyModel a(c, 5), b(c, 5), other(c, 6);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) EXPECT_EQ(a.parameters()[i].value, b.parameters()[i].value);
  EXPECT_NE(param(a, "x_embed.w"), param(other, "x_embed.w"));
  EXPECT_EQ(param(a, "control.out.w").cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(param(a, "control.out.b").cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(param(a, "view.out.w").cwiseAbs().maxCoeff(), 0.0);
  const Matrix& ada_b = param(a, "base0.ada.b");
  EXPECT_EQ(ada_b.middleCols(0, 2 * c.width).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(ada_b.middleCols(2 * c.width, c.width).minCoeff(), 1.0);
  EXPECT_EQ(param(a, "final.ada.b").cwiseAbs().maxCoeff(), 0.0);
}

TEST(ToyModel, ZeroInitControlMakesConditionInert) {
  const ModelConfig c = small_config();
  const ToyModel m(c, 7);
  const LatentShape s{2, 2, 4, 2, 2};
  const Latent x = Latent::normal(s, 8);
  const ConditionSet conds = random_conds(s, 20);
  const Latent cond = m.predict(x, 0.3, &conds, false);
  const Latent uncond = m.predict(x, 0.3, &conds, true);
  EXPECT_TRUE(cond.tokens == uncond.tokens);
  EXPECT_TRUE(m.predict(x, 0.3, nullptr, false).tokens == uncond.tokens);
  EXPECT_GT(cond.tokens.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ToyModel, ViewPermutationEquivariance) {
  const ModelConfig c = small_config();
  ToyModel m(c, 9);
  m.randomize_all(10, 0.8);
  const LatentShape s{3, 2, 4, 2, 2};
  const Latent x = Latent::normal(s, 11);
  const ConditionSet conds = random_conds(s, 30);
  const std::vector<int> perm = {2, 0, 1};
  Latent xp = x;
  xp.tokens = permute_views(x.tokens, s, perm);
  ConditionSet cp = conds;
  for (auto& l : cp.latents) l.tokens = permute_views(l.tokens, s, perm);
  for (bool drop : {false, true}) {
    const Matrix out = m.predict(x, 0.45, &conds, drop).tokens;
    const Matrix outp = m.predict(xp, 0.45, &cp, drop).tokens;
    EXPECT_LT((permute_views(out, s, perm) - outp).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ToyModel, SingleViewAttention) {
  ModelConfig with = small_config(), without = small_config();
  without.view_attention = false;
  const LatentShape s{1, 2, 4, 2, 2};
  const Latent x = Latent::normal(s, 12);
  const ConditionSet conds = random_conds(s, 40);
  // Zero-initialized output projection: the block starts as the identity.
  const ToyModel a(with, 13), b(without, 13);
  EXPECT_TRUE(a.predict(x, 0.2, &conds, false).tokens == b.predict(x, 0.2, &conds, false).tokens);

  // With one view each token attends only to itself, so the block is the fixed
  // linear map out(v(LN h)) and queries/keys have no effect.
  ToyModel r(with, 14);
  r.randomize_all(15, 0.8);
  const Matrix ref = r.predict(x, 0.2, &conds, false).tokens;
  ToyModel rq = r;
  const Index D = with.width;
  Matrix& qkv = rq.parameters()[rq.parameter_index("view.qkv.w")].value;
  std::mt19937_64 rng(16);
  std::normal_distribution<double> n;
  for (Index i = 0; i < qkv.rows(); ++i)
    for (Index j = 0; j < 2 * D; ++j) qkv(i, j) = 3.0 * n(rng);
  EXPECT_LT((rq.predict(x, 0.2, &conds, false).tokens - ref).cwiseAbs().maxCoeff(), 1e-12);
  ToyModel rv = r;
  rv.parameters()[rv.parameter_index("view.qkv.w")].value.middleCols(2 * D, D) *= 1.5;
  EXPECT_GT((rv.predict(x, 0.2, &conds, false).tokens - ref).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FuseConditions, ZeroConditionsGiveBiasPath) {
  const ModelConfig c = small_config();
  ToyModel m(c, 17);
  m.randomize_all(18);
  const LatentShape s{2, 1, 4, 2, 3};
  ConditionSet zero;
  for (auto& l : zero.latents) l = Latent::zeros(s);
  const Matrix fused = m.fuse_conditions(zero);
  Matrix cat(1, 5 * c.embed_dim);
  for (int k = 0; k < 5; ++k)
    cat.middleCols(k * c.embed_dim, c.embed_dim) = param(m, std::string("embed.") + ConditionSet::kNames[k] + ".b");
  Matrix h = cat * param(m, "fusion.fc1.w") + param(m, "fusion.fc1.b");
  for (Index i = 0; i < h.size(); ++i) h.data()[i] = gelu(h.data()[i]);
  const Matrix expect = h * param(m, "fusion.fc2.w") + param(m, "fusion.fc2.b");
  ASSERT_EQ(fused.rows(), s.tokens());
  for (Index r = 0; r < fused.rows(); ++r) EXPECT_LT((fused.row(r) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FuseConditions, OrderMatters) {
  ToyModel m(small_config(), 19);
  m.randomize_all(20);
  const LatentShape s{1, 1, 4, 2, 2};
  const ConditionSet conds = random_conds(s, 50);
  ConditionSet swapped = conds;
  std::swap(swapped.latents[0], swapped.latents[1]);
  EXPECT_GT((m.fuse_conditions(conds) - m.fuse_conditions(swapped)).cwiseAbs().maxCoeff(), 1e-3);
  ConditionSet bad = conds;
  bad.latents[3] = Latent::normal(LatentShape{1, 1, 4, 2, 1}, 1);
  EXPECT_THROW(m.fuse_conditions(bad), InputError);
}

TEST(FuseConditions, Linearization) {
  const ModelConfig c = small_config();
  ToyModel m(c, 21);
  m.randomize_all(22);
  const LatentShape s{1, 2, 4, 2, 2};
  const ConditionSet conds = random_conds(s, 60);
  const int k = 2;  // edge
  const Latent delta = Latent::normal(s, 70);
  const double amp = 1e-4;
  ConditionSet plus = conds, minus = conds;
  plus.latents[k].tokens += amp * delta.tokens;
  minus.latents[k].tokens -= amp * delta.tokens;
  const Matrix actual = (m.fuse_conditions(plus) - m.fuse_conditions(minus)) / 2.0;

  // Predicted: delta through embedder k, fc1 rows of block k, gelu slope, fc2.
  const Index E = c.embed_dim;
  Matrix cat(s.tokens(), 5 * E);
  for (int j = 0; j < 5; ++j) {
    const std::string name = std::string("embed.") + ConditionSet::kNames[j];
    cat.middleCols(j * E, E) = (conds.latents[j].tokens * param(m, name + ".w")).rowwise() +
                               param(m, name + ".b").row(0);
  }
  Matrix pre = (cat * param(m, "fusion.fc1.w")).rowwise() + param(m, "fusion.fc1.b").row(0);
  const Matrix d_embed = amp * delta.tokens * param(m, std::string("embed.") + ConditionSet::kNames[k] + ".w");
  Matrix d_pre = d_embed * param(m, "fusion.fc1.w").middleRows(k * E, E);
  for (Index i = 0; i < d_pre.size(); ++i) d_pre.data()[i] *= gelu_grad(pre.data()[i]);
  const Matrix predicted = d_pre * param(m, "fusion.fc2.w");
  EXPECT_LT((actual - predicted).norm(), 1e-6 * predicted.norm());
  EXPECT_GT(predicted.norm(), 0.0);
}

TEST(Checkpoint, RoundTrip) {
  testing_support::TempDir tmp;
  ToyModel m(small_config(), 23);
  m.randomize_all(24);
  save_checkpoint(m, tmp / "ckpt.bin");
  const ToyModel back = load_checkpoint(tmp / "ckpt.bin");
  EXPECT_EQ(back.config(), m.config());
  ASSERT_EQ(back.parameters().size(), m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    EXPECT_EQ(back.parameters()[i].name, m.parameters()[i].name);
    EXPECT_TRUE(back.parameters()[i].value == m.parameters()[i].value);
  }
  save_checkpoint(back, tmp / "again.bin");
  EXPECT_EQ(testing_support::read_bytes(tmp / "ckpt.bin"), testing_support::read_bytes(tmp / "again.bin"));
}

TEST(Checkpoint, Errors) {
  testing_support::TempDir tmp;
  try {
    load_checkpoint(tmp / "missing.bin");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("checkpoint not found"), std::string::npos);
  }
  const ToyModel m(small_config(), 25);
  save_checkpoint(m, tmp / "good.bin");
  const std::string bytes = testing_support::read_bytes(tmp / "good.bin");
  std::string magic = bytes;
  magic[0] = 'X';
  testing_support::write_bytes(tmp / "magic.bin", magic);
  EXPECT_THROW(load_checkpoint(tmp / "magic.bin"), InputError);
  std::string version = bytes;
  version[8] = 9;
  testing_support::write_bytes(tmp / "version.bin", version);
  EXPECT_THROW(load_checkpoint(tmp / "version.bin"), InputError);
  testing_support::write_bytes(tmp / "short.bin", bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_checkpoint(tmp / "short.bin"), InputError);
}
