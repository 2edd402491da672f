#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "drivedit/rfdit/autograd.hpp"

using namespace drivedit::rfdit;

namespace {

using Fn = std::function<Var(Tape&, const std::vector<Var>&)>;

Matrix randn(Index r, Index c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Scalarizes a non-scalar output with fixed random weights so every output
// entry contributes a distinct coefficient.
Var scalarize(const Var& out, std::uint64_t seed) {
  if (out.rows() == 1 && out.cols() == 1) return out;
  std::mt19937_64 rng(seed);
  return sum(mul(out, out.tape().constant(randn(out.rows(), out.cols(), rng))));
}

double evaluate(const Fn& f, const std::vector<Matrix>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& m : inputs) vars.push_back(tape.constant(m));
  return scalarize(f(tape, vars), 77).scalar();
}

// Central differences against reverse mode for every input entry.
void check_gradients(const Fn& f, std::vector<Matrix> inputs, double tol = 1e-6) {
  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& m : inputs) vars.push_back(tape.leaf(m));
  const Var out = scalarize(f(tape, vars), 77);
  tape.backward(out);
  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix g = tape.grad(vars[k]);
    ASSERT_EQ(g.rows(), inputs[k].rows());
    ASSERT_EQ(g.cols(), inputs[k].cols());
    for (Index i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k].data()[i];
      inputs[k].data()[i] = x0 + h;
      const double fp = evaluate(f, inputs);
      inputs[k].data()[i] = x0 - h;
      const double fm = evaluate(f, inputs);
      inputs[k].data()[i] = x0;
      const double fd = (fp - fm) / (2 * h);
      EXPECT_NEAR(g.data()[i], fd, tol * std::max(1.0, std::abs(fd))) << "input " << k << " entry " << i;
    }
  }
}

}  // namespace

TEST(Autograd, Arithmetic) {
  std::mt19937_64 rng(1);
  check_gradients([](Tape&, const std::vector<Var>& v) { return matmul(v[0], v[1]); },
                  {randn(3, 4, rng), randn(4, 2, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return add(v[0], v[1]); }, {randn(3, 4, rng), randn(3, 4, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return sub(v[0], v[1]); }, {randn(3, 4, rng), randn(3, 4, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return mul(v[0], v[1]); }, {randn(3, 4, rng), randn(3, 4, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return scale(v[0], -2.5); }, {randn(2, 5, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return add_row(v[0], v[1]); },
                  {randn(4, 3, rng), randn(1, 3, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return mul_row(v[0], v[1]); },
                  {randn(4, 3, rng), randn(1, 3, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return broadcast_rows(v[0], 5); }, {randn(1, 3, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return linear(v[0], v[1], v[2]); },
                  {randn(5, 3, rng), randn(3, 4, rng), randn(1, 4, rng)});
}

TEST(Autograd, SlicesAndConcat) {
  std::mt19937_64 rng(2);
  check_gradients(
      [](Tape&, const std::vector<Var>& v) {
        const Var parts[] = {v[0], v[1], v[0]};
        return concat_cols(parts);
      },
      {randn(3, 2, rng), randn(3, 4, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return slice_cols(v[0], 2, 3); }, {randn(4, 6, rng)});
}

TEST(Autograd, Activations) {
  std::mt19937_64 rng(3);
  check_gradients([](Tape&, const std::vector<Var>& v) { return tanh(v[0]); }, {randn(3, 5, rng, 2.0)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return silu(v[0]); }, {randn(3, 5, rng, 2.0)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return gelu(v[0]); }, {randn(3, 5, rng, 2.0)});
}

TEST(Autograd, ActivationValues) {
  Tape tape;
  Matrix x(1, 3);
  x << -1.0, 0.0, 2.0;
  const Var v = tape.constant(x);
  EXPECT_NEAR(silu(v).value()(0, 0), -1.0 / (1.0 + std::exp(1.0)), 1e-15);
  EXPECT_NEAR(silu(v).value()(0, 2), 2.0 / (1.0 + std::exp(-2.0)), 1e-15);
  const double c = std::sqrt(2.0 / M_PI);
  EXPECT_NEAR(gelu(v).value()(0, 2), 0.5 * 2.0 * (1 + std::tanh(c * (2.0 + 0.044715 * 8.0))), 1e-15);
  EXPECT_EQ(gelu(v).value()(0, 1), 0.0);
}

TEST(Autograd, Normalizations) {
  std::mt19937_64 rng(4);
  check_gradients([](Tape&, const std::vector<Var>& v) { return layer_norm(v[0]); }, {randn(4, 6, rng)}, 1e-5);
  check_gradients([](Tape&, const std::vector<Var>& v) { return normalize_rows(v[0]); }, {randn(4, 6, rng)});

  Tape tape;
  const Matrix x = randn(3, 8, rng, 3.0);
  const Matrix ln = layer_norm(tape.constant(x)).value();
  const Matrix nr = normalize_rows(tape.constant(x)).value();
  for (Index i = 0; i < 3; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    for (Index j = 0; j < 8; ++j) EXPECT_NEAR(ln(i, j), (x(i, j) - mu) / std::sqrt(var + 1e-6), 1e-12);
    EXPECT_NEAR(nr.row(i).norm(), 1.0, 1e-9);
  }
}

TEST(Autograd, Reductions) {
  std::mt19937_64 rng(5);
  check_gradients([](Tape&, const std::vector<Var>& v) { return sum(v[0]); }, {randn(3, 4, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return mean(v[0]); }, {randn(3, 4, rng)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return sum_squares(v[0]); }, {randn(3, 4, rng)});
}

TEST(Autograd, Gather) {
  std::mt19937_64 rng(6);
  auto index = std::make_shared<std::vector<std::int64_t>>(std::vector<std::int64_t>{5, 0, -1, 3, 3, 11, 2, -1});
  check_gradients([&](Tape&, const std::vector<Var>& v) { return gather(v[0], 2, 4, index); }, {randn(3, 4, rng)});
  Tape tape;
  const Matrix a = randn(3, 4, rng);
  const Matrix g = gather(tape.constant(a), 2, 4, index).value();
  EXPECT_EQ(g(0, 0), a.data()[5]);
  EXPECT_EQ(g(0, 2), 0.0);
  EXPECT_EQ(g(1, 1), a.data()[11]);
}

TEST(Autograd, GroupedAttention) {
  std::mt19937_64 rng(7);
  auto groups = std::make_shared<std::vector<std::vector<Index>>>(
      std::vector<std::vector<Index>>{{0, 2, 4}, {1, 3}, {5}});
  check_gradients(
      [&](Tape&, const std::vector<Var>& v) { return grouped_attention(v[0], v[1], v[2], 2, groups); },
      {randn(6, 4, rng), randn(6, 4, rng), randn(6, 4, rng)});

  // Direct softmax reference.
  const Matrix q = randn(6, 4, rng), k = randn(6, 4, rng), v = randn(6, 4, rng);
  Tape tape;
  const Matrix out = grouped_attention(tape.constant(q), tape.constant(k), tape.constant(v), 2, groups).value();
  for (const auto& g : *groups)
    for (Index i : g)
      for (int h = 0; h < 2; ++h) {
        std::vector<double> w;
        double z = 0;
        for (Index j : g) {
          double s = 0;
          for (int d = 0; d < 2; ++d) s += q(i, 2 * h + d) * k(j, 2 * h + d);
          w.push_back(std::exp(s / std::sqrt(2.0)));
          z += w.back();
        }
        for (int d = 0; d < 2; ++d) {
          double acc = 0;
          for (std::size_t n = 0; n < g.size(); ++n) acc += w[n] / z * v(g[n], 2 * h + d);
          EXPECT_NEAR(out(i, 2 * h + d), acc, 1e-12);
        }
      }
}

TEST(Autograd, SharedSubexpressionsAccumulate) {
  std::mt19937_64 rng(8);
  check_gradients(
      [](Tape&, const std::vector<Var>& v) {
        const Var a = tanh(v[0]);
        return add(mul(a, a), matmul(a, v[1]));
      },
      {randn(3, 3, rng), randn(3, 3, rng)});
}

TEST(Autograd, SlotGradients) {
  Tape tape;
  Matrix w(1, 2);
  w << 1.5, -2.0;
  const Var a = tape.leaf(w, 0);
  const Var b = tape.leaf(w, 0);
  tape.backward(sum(add(scale(a, 2.0), scale(b, 3.0))));
  std::vector<Matrix> slots = {Matrix::Zero(1, 2)};
  tape.collect_slot_grads(slots);
  EXPECT_EQ(slots[0](0, 0), 5.0);
  EXPECT_EQ(slots[0](0, 1), 5.0);
  EXPECT_EQ(tape.grad(tape.constant(w)).size(), 2);
}
