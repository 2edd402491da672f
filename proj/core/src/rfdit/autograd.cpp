#include "drivedit/rfdit/autograd.hpp"

#include <cmath>
#include <numbers>

#include "drivedit/error.hpp"

namespace drivedit::rfdit {
namespace {

void require(bool cond, const char* what) {
  if (!cond) throw Error(what);
}

bool any_grad(std::initializer_list<const Var*> vars) {
  for (const Var* v : vars)
    if (v->tape().requires_grad(*v)) return true;
  return false;
}

Tape& same_tape(const Var& a, const Var& b) {
  require(&a.tape() == &b.tape(), "autograd: operands live on different tapes");
  return a.tape();
}

}  // namespace

const Matrix& Var::value() const { return tape_->value_of(id_); }

double Var::scalar() const {
  require(rows() == 1 && cols() == 1, "autograd: scalar() on a non-scalar node");
  return value()(0, 0);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::leaf(Matrix value, int slot) {
  Var v = push(std::move(value), true, nullptr);
  nodes_[v.id_].slot = slot;
  return v;
}

Var Tape::push(Matrix value, bool requires_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), Matrix(), requires_grad ? std::move(backward) : nullptr, requires_grad, -1});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Matrix& Tape::grad_acc(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(const Var& out) {
  require(out.tape_ == this, "autograd: backward() on a foreign node");
  require(out.rows() == 1 && out.cols() == 1, "autograd: backward() needs a scalar output");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[out.id_].requires_grad) return;
  grad_acc(out.id_).setOnes();
  for (int id = out.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.backward && n.grad.size() != 0) n.backward(*this, id);
  }
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::collect_slot_grads(std::span<Matrix> out) const {
  for (const Node& n : nodes_) {
    if (n.slot < 0 || n.grad.size() == 0) continue;
    require(static_cast<std::size_t>(n.slot) < out.size(), "autograd: slot out of range");
    Matrix& dst = out[n.slot];
    if (dst.size() == 0) dst = Matrix::Zero(n.value.rows(), n.value.cols());
    dst += n.grad;
  }
}

// ---- ops -------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require(a.cols() == b.rows(), "matmul: shape mismatch");
  const int ia = Tape::id_of(a), ib = Tape::id_of(b);
  const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  Matrix v = a.value() * b.value();
  return t.push(std::move(v), ga || gb, [ia, ib, ga, gb](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (ga) tp.grad_acc(ia).noalias() += g * tp.value_of(ib).transpose();
    if (gb) tp.grad_acc(ib).noalias() += tp.value_of(ia).transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  const int ia = Tape::id_of(a), ib = Tape::id_of(b);
  const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  return t.push(a.value() + b.value(), ga || gb, [ia, ib, ga, gb](Tape& tp, int self) {
    if (ga) tp.grad_acc(ia) += tp.grad_of(self);
    if (gb) tp.grad_acc(ib) += tp.grad_of(self);
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  const int ia = Tape::id_of(a), ib = Tape::id_of(b);
  const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  return t.push(a.value() - b.value(), ga || gb, [ia, ib, ga, gb](Tape& tp, int self) {
    if (ga) tp.grad_acc(ia) += tp.grad_of(self);
    if (gb) tp.grad_acc(ib) -= tp.grad_of(self);
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  const int ia = Tape::id_of(a), ib = Tape::id_of(b);
  const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  return t.push(a.value().cwiseProduct(b.value()), ga || gb, [ia, ib, ga, gb](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (ga) tp.grad_acc(ia) += g.cwiseProduct(tp.value_of(ib));
    if (gb) tp.grad_acc(ib) += g.cwiseProduct(tp.value_of(ia));
  });
}

Var scale(const Var& a, double s) {
  Tape& t = a.tape();
  const int ia = Tape::id_of(a);
  return t.push(a.value() * s, t.requires_grad(a),
                [ia, s](Tape& tp, int self) { tp.grad_acc(ia) += tp.grad_of(self) * s; });
}

Var add_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
  const int ia = Tape::id_of(a), ir = Tape::id_of(row);
  const bool ga = t.requires_grad(a), gr = t.requires_grad(row);
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return t.push(std::move(v), ga || gr, [ia, ir, ga, gr](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (ga) tp.grad_acc(ia) += g;
    if (gr) tp.grad_acc(ir) += g.colwise().sum();
  });
}

Var mul_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  require(row.rows() == 1 && row.cols() == a.cols(), "mul_row: shape mismatch");
  const int ia = Tape::id_of(a), ir = Tape::id_of(row);
  const bool ga = t.requires_grad(a), gr = t.requires_grad(row);
  Matrix v = a.value().array().rowwise() * row.value().row(0).array();
  return t.push(std::move(v), ga || gr, [ia, ir, ga, gr](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (ga) tp.grad_acc(ia).array() += g.array().rowwise() * tp.value_of(ir).row(0).array();
    if (gr) tp.grad_acc(ir) += g.cwiseProduct(tp.value_of(ia)).colwise().sum();
  });
}

Var broadcast_rows(const Var& row, Index n) {
  Tape& t = row.tape();
  require(row.rows() == 1, "broadcast_rows: expected a single row");
  const int ir = Tape::id_of(row);
  Matrix v = row.value().replicate(n, 1);
  return t.push(std::move(v), t.requires_grad(row),
                [ir](Tape& tp, int self) { tp.grad_acc(ir) += tp.grad_of(self).colwise().sum(); });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape& t = parts[0].tape();
  const Index rows = parts[0].rows();
  Index cols = 0;
  bool g = false;
  std::vector<int> ids;
  std::vector<Index> widths;
  std::vector<bool> needs;
  for (const Var& p : parts) {
    require(&p.tape() == &t && p.rows() == rows, "concat_cols: shape mismatch");
    cols += p.cols();
    g = g || t.requires_grad(p);
    ids.push_back(Tape::id_of(p));
    widths.push_back(p.cols());
    needs.push_back(t.requires_grad(p));
  }
  Matrix v(rows, cols);
  Index off = 0;
  for (const Var& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.push(std::move(v), g, [ids, widths, needs](Tape& tp, int self) {
    const Matrix& gr = tp.grad_of(self);
    Index o = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (needs[i]) tp.grad_acc(ids[i]) += gr.middleCols(o, widths[i]);
      o += widths[i];
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  Tape& t = a.tape();
  require(start >= 0 && count > 0 && start + count <= a.cols(), "slice_cols: out of range");
  const int ia = Tape::id_of(a);
  return t.push(a.value().middleCols(start, count), t.requires_grad(a), [ia, start, count](Tape& tp, int self) {
    tp.grad_acc(ia).middleCols(start, count) += tp.grad_of(self);
  });
}

Var tanh(const Var& a) {
  Tape& t = a.tape();
  const int ia = Tape::id_of(a);
  Matrix v = a.value().array().tanh().matrix();
  return t.push(std::move(v), t.requires_grad(a), [ia](Tape& tp, int self) {
    const auto y = tp.value_of(self).array();
    tp.grad_acc(ia).array() += tp.grad_of(self).array() * (1.0 - y * y);
  });
}

Var silu(const Var& a) {
  Tape& t = a.tape();
  const int ia = Tape::id_of(a);
  const Matrix sig = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  Matrix v = a.value().cwiseProduct(sig);
  return t.push(std::move(v), t.requires_grad(a), [ia, sig](Tape& tp, int self) {
    const auto x = tp.value_of(ia).array();
    const auto s = sig.array();
    tp.grad_acc(ia).array() += tp.grad_of(self).array() * (s * (1.0 + x * (1.0 - s)));
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}  // namespace

Var gelu(const Var& a) {
  Tape& t = a.tape();
  const int ia = Tape::id_of(a);
  constexpr double c = kGeluC;
  const auto x = a.value().array();
  const Matrix th = (c * (x + 0.044715 * x.cube())).tanh().matrix();
  Matrix v = (0.5 * x * (1.0 + th.array())).matrix();
  return t.push(std::move(v), t.requires_grad(a), [ia, th](Tape& tp, int self) {
    const auto xx = tp.value_of(ia).array();
    const auto tt = th.array();
    const auto d = 0.5 * (1.0 + tt) + 0.5 * xx * (1.0 - tt * tt) * kGeluC * (1.0 + 3 * 0.044715 * xx * xx);
    tp.grad_acc(ia).array() += tp.grad_of(self).array() * d;
  });
}

Var layer_norm(const Var& a, double eps) {
  Tape& t = a.tape();
  const int ia = Tape::id_of(a);
  const Index n = a.rows(), m = a.cols();
  Matrix xhat(n, m);
  Eigen::VectorXd inv_std(n);
  for (Index i = 0; i < n; ++i) {
    const auto row = a.value().row(i);
    const double mu = row.mean();
    const double var = (row.array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (row.array() - mu) * inv_std(i);
  }
  Matrix v = xhat;
  return t.push(std::move(v), t.requires_grad(a), [ia, xhat, inv_std](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    Matrix& ga = tp.grad_acc(ia);
    const double m = static_cast<double>(g.cols());
    for (Index i = 0; i < g.rows(); ++i) {
      const double gmean = g.row(i).mean();
      const double gx = g.row(i).dot(xhat.row(i)) / m;
      ga.row(i).array() += inv_std(i) * (g.row(i).array() - gmean - xhat.row(i).array() * gx);
    }
  });
}

Var normalize_rows(const Var& a, double eps) {
  Tape& t = a.tape();
  const int ia = Tape::id_of(a);
  const Index n = a.rows();
  Eigen::VectorXd inv(n);
  Matrix v = a.value();
  for (Index i = 0; i < n; ++i) {
    inv(i) = 1.0 / std::sqrt(a.value().row(i).squaredNorm() + eps);
    v.row(i) *= inv(i);
  }
  return t.push(std::move(v), t.requires_grad(a), [ia, inv](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& y = tp.value_of(self);
    Matrix& ga = tp.grad_acc(ia);
    for (Index i = 0; i < g.rows(); ++i) {
      ga.row(i) += inv(i) * (g.row(i) - y.row(i) * g.row(i).dot(y.row(i)));
    }
  });
}

Var gather(const Var& a, Index rows, Index cols, std::shared_ptr<const std::vector<std::int64_t>> index) {
  Tape& t = a.tape();
  require(static_cast<Index>(index->size()) == rows * cols, "gather: index size mismatch");
  const int ia = Tape::id_of(a);
  Matrix v(rows, cols);
  const double* src = a.value().data();
  const std::int64_t limit = a.value().size();
  double* dst = v.data();
  for (std::size_t i = 0; i < index->size(); ++i) {
    const std::int64_t k = (*index)[i];
    require(k < limit, "gather: index out of range");
    dst[i] = k < 0 ? 0.0 : src[k];
  }
  return t.push(std::move(v), t.requires_grad(a), [ia, index](Tape& tp, int self) {
    const double* g = tp.grad_of(self).data();
    double* out = tp.grad_acc(ia).data();
    for (std::size_t i = 0; i < index->size(); ++i) {
      const std::int64_t k = (*index)[i];
      if (k >= 0) out[k] += g[i];
    }
  });
}

Var grouped_attention(const Var& q, const Var& k, const Var& v, int heads,
                      std::shared_ptr<const std::vector<std::vector<Index>>> groups) {
  Tape& t = same_tape(q, k);
  same_tape(q, v);
  const Index n = q.rows(), d = q.cols();
  require(k.rows() == n && v.rows() == n && k.cols() == d && v.cols() == d, "attention: shape mismatch");
  require(heads > 0 && d % heads == 0, "attention: width not divisible by heads");
  const Index dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const int iq = Tape::id_of(q), ik = Tape::id_of(k), iv = Tape::id_of(v);

  // Probabilities per (group, head), kept for the backward pass.
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(groups->size() * heads);
  Matrix out = Matrix::Zero(n, d);
  for (const auto& g : *groups) {
    const Index m = static_cast<Index>(g.size());
    for (int h = 0; h < heads; ++h) {
      Matrix qg(m, dh), kg(m, dh), vg(m, dh);
      for (Index r = 0; r < m; ++r) {
        qg.row(r) = q.value().block(g[r], h * dh, 1, dh);
        kg.row(r) = k.value().block(g[r], h * dh, 1, dh);
        vg.row(r) = v.value().block(g[r], h * dh, 1, dh);
      }
      Matrix s = (qg * kg.transpose()) * sc;
      for (Index r = 0; r < m; ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp().matrix();
        s.row(r) /= s.row(r).sum();
      }
      const Matrix o = s * vg;
      for (Index r = 0; r < m; ++r) out.block(g[r], h * dh, 1, dh) = o.row(r);
      probs->push_back(std::move(s));
    }
  }
  const bool g_any = any_grad({&q, &k, &v});
  return t.push(std::move(out), g_any, [iq, ik, iv, heads, dh, sc, groups, probs](Tape& tp, int self) {
    const Matrix& gout = tp.grad_of(self);
    const Matrix& qv = tp.value_of(iq);
    const Matrix& kv = tp.value_of(ik);
    const Matrix& vv = tp.value_of(iv);
    Matrix& gq = tp.grad_acc(iq);
    Matrix& gk = tp.grad_acc(ik);
    Matrix& gv = tp.grad_acc(iv);
    std::size_t pi = 0;
    for (const auto& g : *groups) {
      const Index m = static_cast<Index>(g.size());
      for (int h = 0; h < heads; ++h) {
        const Matrix& p = (*probs)[pi++];
        Matrix qg(m, dh), kg(m, dh), vg(m, dh), go(m, dh);
        for (Index r = 0; r < m; ++r) {
          qg.row(r) = qv.block(g[r], h * dh, 1, dh);
          kg.row(r) = kv.block(g[r], h * dh, 1, dh);
          vg.row(r) = vv.block(g[r], h * dh, 1, dh);
          go.row(r) = gout.block(g[r], h * dh, 1, dh);
        }
        const Matrix dv = p.transpose() * go;
        const Matrix dp = go * vg.transpose();
        Matrix ds = p.cwiseProduct(dp);
        const Eigen::VectorXd rowdot = ds.rowwise().sum();
        ds -= p.cwiseProduct(rowdot.replicate(1, m));
        const Matrix dq = (ds * kg) * sc;
        const Matrix dk = (ds.transpose() * qg) * sc;
        for (Index r = 0; r < m; ++r) {
          gq.block(g[r], h * dh, 1, dh) += dq.row(r);
          gk.block(g[r], h * dh, 1, dh) += dk.row(r);
          gv.block(g[r], h * dh, 1, dh) += dv.row(r);
        }
      }
    }
  });
}

Var sum(const Var& a) {
  Tape& t = a.tape();
  const int ia = Tape::id_of(a);
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return t.push(std::move(v), t.requires_grad(a),
                [ia](Tape& tp, int self) { tp.grad_acc(ia).array() += tp.grad_of(self)(0, 0); });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_squares(const Var& a) {
  Tape& t = a.tape();
  const int ia = Tape::id_of(a);
  Matrix v(1, 1);
  v(0, 0) = a.value().squaredNorm();
  return t.push(std::move(v), t.requires_grad(a), [ia](Tape& tp, int self) {
    tp.grad_acc(ia) += (2.0 * tp.grad_of(self)(0, 0)) * tp.value_of(ia);
  });
}

}  // namespace drivedit::rfdit
