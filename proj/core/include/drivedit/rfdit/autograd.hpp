#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records nodes in creation order, which is a topological
// order, so backward() is a single reverse sweep.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace drivedit::rfdit {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

class Tape;

/// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient.
  Var constant(Matrix value);
  /// Leaf whose gradient is tracked; `slot` >= 0 ties it to a parameter index.
  Var leaf(Matrix value, int slot = -1);

  /// Seeds d(out)/d(out) = 1 for a 1x1 node and propagates to every leaf.
  void backward(const Var& out);

  /// Gradient of a node after backward(); zero matrix if never reached.
  Matrix grad(const Var& v) const;
  /// Adds the gradient of every slot-tagged leaf into out[slot].
  void collect_slot_grads(std::span<Matrix> out) const;

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  bool requires_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }
  Var push(Matrix value, bool requires_grad, Backward backward);
  const Matrix& value_of(int id) const { return nodes_[id].value; }
  const Matrix& grad_of(int id) const { return nodes_[id].grad; }
  /// Gradient accumulator of a node, allocated as zeros on first use.
  Matrix& grad_acc(int id);
  static int id_of(const Var& v) { return v.id_; }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    int slot = -1;
  };
  std::vector<Node> nodes_;
};

// ---- ops -------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(const Var& a, const Var& row);
/// a (n x m) ⊙ row (1 x m) broadcast over rows.
Var mul_row(const Var& a, const Var& row);
/// Repeats a 1 x m row n times.
Var broadcast_rows(const Var& row, Index n);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, Index start, Index count);

Var tanh(const Var& a);
Var silu(const Var& a);
/// tanh approximation of GELU (smooth everywhere).
Var gelu(const Var& a);

/// Per-row standardization without affine parameters.
Var layer_norm(const Var& a, double eps = 1e-6);
/// Per-row x / sqrt(|x|^2 + eps).
Var normalize_rows(const Var& a, double eps = 1e-10);

/// out(i, j) = a.flat[index[i * cols + j]], or 0 where index is -1.
Var gather(const Var& a, Index rows, Index cols, std::shared_ptr<const std::vector<std::int64_t>> index);

/// Multi-head scaled dot-product attention restricted to token groups: each
/// token attends only to tokens in its group. q, k, v are n x d; d must be a
/// multiple of `heads`. Every token must belong to exactly one group.
Var grouped_attention(const Var& q, const Var& k, const Var& v, int heads,
                      std::shared_ptr<const std::vector<std::vector<Index>>> groups);

Var sum(const Var& a);
Var mean(const Var& a);
Var sum_squares(const Var& a);

/// x W + b with W (in x out) and b (1 x out).
inline Var linear(const Var& x, const Var& w, const Var& b) { return add_row(matmul(x, w), b); }

}  // namespace drivedit::rfdit
