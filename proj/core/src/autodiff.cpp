#include "niso/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "niso/error.hpp"
#include "niso/linalg.hpp"
#include "niso/parallel.hpp"

namespace niso {

// ---------------------------------------------------------------------------
// Var / BackwardContext / Tape
// ---------------------------------------------------------------------------

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("use of an empty Var");
  return tape_->node(*this).value;
}

bool Var::requires_grad() const {
  if (!tape_) throw UsageError("use of an empty Var");
  return tape_->node(*this).needs_grad;
}

Tape& Var::tape() const {
  if (!tape_) throw UsageError("use of an empty Var");
  tape_->check(*this);
  return *tape_;
}

const Tensor& BackwardContext::input(std::size_t i) const { return tape_.nodes_[inputs_[i]].value; }

bool BackwardContext::needs_grad(std::size_t i) const { return tape_.nodes_[inputs_[i]].needs_grad; }

void BackwardContext::accumulate(std::size_t i, std::span<const double> g) {
  auto& n = tape_.nodes_[inputs_[i]];
  if (!n.needs_grad) return;
  if (g.size() != n.value.size()) {
    throw DimensionError("gradient for input of '" + n.op + "' has " + std::to_string(g.size()) +
                         " entries, expected " + std::to_string(n.value.size()));
  }
  if (n.adjoint.empty()) {
    n.adjoint.assign(g.begin(), g.end());
    return;
  }
  for (std::size_t k = 0; k < g.size(); ++k) n.adjoint[k] += g[k];
}

void Tape::check(const Var& v) const {
  if (v.tape_ != this) throw UsageError("Var belongs to a different tape");
  if (v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw UsageError("Var refers to a cleared tape (backward already replayed?)");
  }
}

const Tape::Node& Tape::node(const Var& v) const {
  check(v);
  return nodes_[v.id_];
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, {}, nullptr, false, {}});
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::watch(Tensor& leaf) {
  Tensor copy(leaf.shape(), leaf.storage());
  nodes_.push_back(Node{"leaf", std::move(copy), {}, {}, &leaf, leaf.requires_grad, {}});
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::record(std::string op, Tensor value, std::vector<Var> inputs, BackwardRule rule) {
  std::vector<std::size_t> ids;
  ids.reserve(inputs.size());
  bool needs_grad = false;
  for (const auto& in : inputs) {
    check(in);
    ids.push_back(in.id_);
    needs_grad = needs_grad || nodes_[in.id_].needs_grad;
  }
  if (!needs_grad) rule = nullptr;
  nodes_.push_back(Node{std::move(op), std::move(value), std::move(ids), std::move(rule), nullptr, needs_grad, {}});
  return Var(this, nodes_.size() - 1, generation_);
}

void Tape::backward(const Var& loss) {
  check(loss);
  const auto& root = nodes_[loss.id_];
  if (root.value.size() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " + to_string(root.value.shape()));
  }
  nodes_[loss.id_].adjoint.assign(1, 1.0);
  for (std::size_t idx = loss.id_ + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (!n.needs_grad || n.adjoint.empty()) continue;
    if (n.leaf) {
      auto& g = n.leaf->grad;
      if (g.size() != n.adjoint.size()) g.assign(n.adjoint.size(), 0.0);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.adjoint[k];
      continue;
    }
    if (!n.rule) continue;
    Tensor grad(n.value.shape(), std::move(n.adjoint));
    if (!fault_op_.empty() && n.op == fault_op_) {
      for (double& x : grad.storage()) x *= fault_factor_;
    }
    BackwardContext ctx(*this, n.inputs, grad);
    n.rule(ctx);
  }
  reset();
}

void Tape::reset() {
  nodes_.clear();
  ++generation_;
}

// ---------------------------------------------------------------------------
// Dense kernels
// ---------------------------------------------------------------------------

namespace {

// out[m×n] += a[m×p]·b[p×n]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t p, std::size_t n) {
  parallel_for(m, p * n, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      double* orow = out + i * n;
      for (std::size_t l = 0; l < p; ++l) {
        const double s = a[i * p + l];
        const double* brow = b + l * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += s * brow[j];
      }
    }
  });
}

// out[m×p] += g[m×n]·b[p×n]ᵀ
void gemm_nt(const double* g, const double* b, double* out, std::size_t m, std::size_t n, std::size_t p) {
  parallel_for(m, p * n, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      const double* grow = g + i * n;
      for (std::size_t l = 0; l < p; ++l) {
        const double* brow = b + l * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
        out[i * p + l] += s;
      }
    }
  });
}

// out[p×n] += a[m×p]ᵀ·g[m×n]
void gemm_tn(const double* a, const double* g, double* out, std::size_t m, std::size_t p, std::size_t n) {
  parallel_for(p, m * n, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* grow = g + i * n;
      for (std::size_t l = r0; l < r1; ++l) {
        const double s = a[i * p + l];
        double* orow = out + l * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += s * grow[j];
      }
    }
  });
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + " needs a matrix, got " + to_string(t.shape()));
}

Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (a.size() == 1 && b.size() == 1) return a.rank() >= b.rank() ? a.shape() : b.shape();
  if (a.size() == 1) return b.shape();
  if (b.size() == 1) return a.shape();
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                       to_string(b.shape()));
}

// Accumulates a (possibly broadcast) gradient into input i.
void accumulate_broadcast(BackwardContext& ctx, std::size_t i, const std::vector<double>& g) {
  if (!ctx.needs_grad(i)) return;
  if (ctx.input(i).size() == g.size()) {
    ctx.accumulate(i, g);
    return;
  }
  double s = 0.0;
  for (double x : g) s += x;
  ctx.accumulate(i, std::span<const double>(&s, 1));
}

template <class F, class DA, class DB>
Var binary(const char* op, const Var& a, const Var& b, F f, DA dfa, DB dfb) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(broadcast_shape(x, y, op));
  const std::size_t n = out.size();
  const bool xs = x.size() != n, ys = y.size() != n;
  for (std::size_t i = 0; i < n; ++i) out[i] = f(x[xs ? 0 : i], y[ys ? 0 : i]);
  return a.tape().record(op, std::move(out), {a, b}, [dfa, dfb, xs, ys, n](BackwardContext& ctx) {
    const Tensor& x = ctx.input(0);
    const Tensor& y = ctx.input(1);
    const Tensor& g = ctx.grad_output();
    std::vector<double> buf(n);
    if (ctx.needs_grad(0)) {
      for (std::size_t i = 0; i < n; ++i) buf[i] = g[i] * dfa(x[xs ? 0 : i], y[ys ? 0 : i]);
      accumulate_broadcast(ctx, 0, buf);
    }
    if (ctx.needs_grad(1)) {
      for (std::size_t i = 0; i < n; ++i) buf[i] = g[i] * dfb(x[xs ? 0 : i], y[ys ? 0 : i]);
      accumulate_broadcast(ctx, 1, buf);
    }
  });
}

// `df(x, y)` receives the input and the forward output.
template <class F, class DF>
Var unary(const char* op, const Var& a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  Tensor saved = out;
  return a.tape().record(op, std::move(out), {a}, [df, saved = std::move(saved)](BackwardContext& ctx) {
    const Tensor& x = ctx.input(0);
    const Tensor& g = ctx.grad_output();
    std::vector<double> buf(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) buf[i] = g[i] * df(x[i], saved[i]);
    ctx.accumulate(0, buf);
  });
}

double stable_softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.shape()[1] != y.shape()[0]) {
    throw DimensionError("matmul shape mismatch: " + to_string(x.shape()) + " x " + to_string(y.shape()));
  }
  const std::size_t m = x.shape()[0], p = x.shape()[1], n = y.shape()[1];
  Tensor out({m, n});
  gemm_nn(x.data().data(), y.data().data(), out.data().data(), m, p, n);
  return a.tape().record("matmul", std::move(out), {a, b}, [m, p, n](BackwardContext& ctx) {
    const double* g = ctx.grad_output().data().data();
    if (ctx.needs_grad(0)) {
      std::vector<double> ga(m * p, 0.0);
      gemm_nt(g, ctx.input(1).data().data(), ga.data(), m, n, p);
      ctx.accumulate(0, ga);
    }
    if (ctx.needs_grad(1)) {
      std::vector<double> gb(p * n, 0.0);
      gemm_tn(ctx.input(0).data().data(), g, gb.data(), m, p, n);
      ctx.accumulate(1, gb);
    }
  });
}

Var transpose(const Var& a) {
  require_matrix(a.value(), "transpose");
  return a.tape().record("transpose", a.value().transposed(), {a}, [](BackwardContext& ctx) {
    ctx.accumulate(0, ctx.grad_output().transposed().data());
  });
}

Var reshape(const Var& a, Shape shape) {
  return a.tape().record("reshape", a.value().reshaped(std::move(shape)), {a},
                         [](BackwardContext& ctx) { ctx.accumulate(0, ctx.grad_output().data()); });
}

Var add(const Var& a, const Var& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var neg(const Var& a) {
  return unary(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var exp(const Var& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var abs(const Var& a) {
  return unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var softplus(const Var& a) {
  return unary("softplus", a, stable_softplus, [](double x, double) { return sigmoid(x); });
}

Var sqrt(const Var& a) {
  for (double x : a.value().data()) {
    if (x < 0.0) throw DomainError("sqrt of negative value");
  }
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var reciprocal(const Var& a) {
  for (double x : a.value().data()) {
    if (x == 0.0) throw DomainError("reciprocal of zero");
  }
  return unary(
      "reciprocal", a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Var scale(const Var& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return a.tape().record("sum", Tensor::scalar(s), {a}, [](BackwardContext& ctx) {
    std::vector<double> g(ctx.input(0).size(), ctx.grad_output()[0]);
    ctx.accumulate(0, g);
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return a.tape().record("mean", Tensor::scalar(s / n), {a}, [n](BackwardContext& ctx) {
    std::vector<double> g(ctx.input(0).size(), ctx.grad_output()[0] / n);
    ctx.accumulate(0, g);
  });
}

Var frobenius_norm(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x * x;
  const double norm = std::sqrt(s);
  return a.tape().record("frobenius_norm", Tensor::scalar(norm), {a}, [norm](BackwardContext& ctx) {
    const Tensor& x = ctx.input(0);
    std::vector<double> g(x.size(), 0.0);
    if (norm > 0.0) {
      const double c = ctx.grad_output()[0] / norm;
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = c * x[i];
    }
    ctx.accumulate(0, g);
  });
}

Var scale_rows(const Var& x, const Var& v) {
  const Tensor& a = x.value();
  const Tensor& d = v.value();
  if (a.rank() < 1 || a.rows() != d.size() || d.rank() > 1) {
    throw DimensionError("scale_rows: " + to_string(a.shape()) + " rows vs weights " + to_string(d.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(a.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = d[i] * a[i * c + j];
  return x.tape().record("scale_rows", std::move(out), {x, v}, [r, c](BackwardContext& ctx) {
    const Tensor& a = ctx.input(0);
    const Tensor& d = ctx.input(1);
    const Tensor& g = ctx.grad_output();
    if (ctx.needs_grad(0)) {
      std::vector<double> ga(r * c);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] = d[i] * g[i * c + j];
      ctx.accumulate(0, ga);
    }
    if (ctx.needs_grad(1)) {
      std::vector<double> gd(r, 0.0);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gd[i] += a[i * c + j] * g[i * c + j];
      ctx.accumulate(1, gd);
    }
  });
}

Var row_sums(const Var& x) {
  const Tensor& a = x.value();
  require_matrix(a, "row_sums");
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out({r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += a[i * c + j];
  return x.tape().record("row_sums", std::move(out), {x}, [r, c](BackwardContext& ctx) {
    const Tensor& g = ctx.grad_output();
    std::vector<double> ga(r * c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] = g[i];
    ctx.accumulate(0, ga);
  });
}

Var diag(const Var& v) {
  const Tensor& d = v.value();
  if (d.rank() > 1) throw DimensionError("diag needs a vector, got " + to_string(d.shape()));
  const std::size_t k = d.size();
  Tensor out({k, k});
  for (std::size_t i = 0; i < k; ++i) out(i, i) = d[i];
  return v.tape().record("diag", std::move(out), {v}, [k](BackwardContext& ctx) {
    const Tensor& g = ctx.grad_output();
    std::vector<double> gd(k);
    for (std::size_t i = 0; i < k; ++i) gd[i] = g[i * k + i];
    ctx.accumulate(0, gd);
  });
}

Var outer_diff(const Var& v) {
  const Tensor& d = v.value();
  if (d.rank() > 1) throw DimensionError("outer_diff needs a vector, got " + to_string(d.shape()));
  const std::size_t k = d.size();
  Tensor out({k, k});
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) out(i, j) = d[i] - d[j];
  return v.tape().record("outer_diff", std::move(out), {v}, [k](BackwardContext& ctx) {
    const Tensor& g = ctx.grad_output();
    std::vector<double> gd(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        gd[i] += g[i * k + j];
        gd[j] -= g[i * k + j];
      }
    ctx.accumulate(0, gd);
  });
}

namespace {

// Gradient of the polar factor for a tall (m >= n) input with thin SVD.
Tensor polar_backward_tall(const Tensor& u, const Tensor& s, const Tensor& v, const Tensor& g) {
  const std::size_t m = u.shape()[0], n = u.shape()[1];
  const Tensor gv = matmul_plain(g, v);                 // m×n
  const Tensor x = matmul_plain(u.transposed(), gv);    // n×n
  Tensor k({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double denom = std::max(s[i] + s[j], kProcrustesClamp);
      k(i, j) = (x(i, j) - x(j, i)) / denom;
    }
  Tensor inner = matmul_plain(u, k);                    // m×n, multiplied by Vᵀ below
  if (m > n) {
    const Tensor ux = matmul_plain(u, x);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        inner(i, j) += (gv(i, j) - ux(i, j)) / std::max(s[j], kProcrustesClamp);
      }
  }
  return matmul_plain(inner, v.transposed());
}

}  // namespace

Var procrustes_project(const Var& a) {
  const Tensor& x = a.value();
  require_matrix(x, "procrustes_project");
  Svd d = svd(x);
  Tensor q = matmul_plain(d.u, d.v.transposed());
  const bool wide = x.shape()[0] < x.shape()[1];
  return a.tape().record("procrustes_project", std::move(q), {a},
                         [d = std::move(d), wide](BackwardContext& ctx) {
                           const Tensor& g = ctx.grad_output();
                           if (!wide) {
                             ctx.accumulate(0, polar_backward_tall(d.u, d.s, d.v, g).data());
                           } else {
                             // Q(A) = Q(Aᵀ)ᵀ; Aᵀ has left vectors V and right vectors U.
                             const Tensor gt = polar_backward_tall(d.v, d.s, d.u, g.transposed());
                             ctx.accumulate(0, gt.transposed().data());
                           }
                         });
}

}  // namespace niso
