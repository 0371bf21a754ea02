#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "niso/tensor.hpp"

namespace niso {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }
  bool requires_grad() const;
  Tape& tape() const;
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id, std::uint64_t generation) : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
  std::uint64_t generation_ = 0;
};

/// Per-node view handed to backward rules.
class BackwardContext {
 public:
  const Tensor& grad_output() const { return grad_; }
  const Tensor& input(std::size_t i) const;
  bool needs_grad(std::size_t i) const;
  /// Adds `g` (same element count as input i) into the adjoint of input i.
  void accumulate(std::size_t i, std::span<const double> g);

 private:
  friend class Tape;
  BackwardContext(Tape& tape, const std::vector<std::size_t>& inputs, const Tensor& grad)
      : tape_(tape), inputs_(inputs), grad_(grad) {}

  Tape& tape_;
  const std::vector<std::size_t>& inputs_;
  const Tensor& grad_;
};

using BackwardRule = std::function<void(BackwardContext&)>;

/// Reverse-mode gradient tape.
///
/// Nodes are appended in evaluation order, so every input precedes its
/// consumers. backward() replays the rules in reverse, adds leaf adjoints into
/// the watched tensors' `grad` buffers and then clears the tape; Vars created
/// before the clear become stale and any further use raises UsageError.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a value that never receives gradient.
  Var constant(Tensor value);
  /// Records a differentiable leaf. `leaf` must outlive the next backward().
  Var watch(Tensor& leaf);
  Var watch(Parameter& param) { return watch(param.tensor); }

  /// Appends an op node. Called by primitive implementations.
  Var record(std::string op, Tensor value, std::vector<Var> inputs, BackwardRule rule);

  void backward(const Var& loss);
  /// Drops all nodes without propagating.
  void reset();

  std::size_t size() const noexcept { return nodes_.size(); }
  std::uint64_t generation() const noexcept { return generation_; }

  /// Test hook: every node recorded with this op name gets its incoming
  /// gradient scaled by `factor` before its rule runs. Empty name disables.
  void inject_fault(std::string op, double factor = 1.5) {
    fault_op_ = std::move(op);
    fault_factor_ = factor;
  }

 private:
  friend class Var;
  friend class BackwardContext;

  struct Node {
    std::string op;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardRule rule;
    Tensor* leaf = nullptr;
    bool needs_grad = false;
    std::vector<double> adjoint;
  };

  const Node& node(const Var& v) const;
  void check(const Var& v) const;

  std::deque<Node> nodes_;
  std::uint64_t generation_ = 1;
  std::string fault_op_;
  double fault_factor_ = 1.0;
};

// ---------------------------------------------------------------------------
// Primitives. Binary elementwise ops accept equal shapes or a scalar operand.
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var exp(const Var& a);
/// Subgradient 0 at 0.
Var abs(const Var& a);
Var square(const Var& a);
/// log(1 + e^x), evaluated stably.
Var softplus(const Var& a);
Var sqrt(const Var& a);
Var reciprocal(const Var& a);
Var scale(const Var& a, double factor);

Var sum(const Var& a);
Var mean(const Var& a);
/// Gradient is a/||a||, or 0 when ||a|| = 0.
Var frobenius_norm(const Var& a);

/// diag(v)·x for x with v.size() rows.
Var scale_rows(const Var& x, const Var& v);
/// Row sums of a matrix, returned as a vector.
Var row_sums(const Var& x);
/// Square matrix with v on the diagonal.
Var diag(const Var& v);
/// D[i][j] = v[i] − v[j].
Var outer_diff(const Var& v);

/// Orthogonal polar factor U Vᵀ of a (thin SVD for rectangular inputs).
///
/// Backward implements the differential of the polar factor,
///   dA = U K Vᵀ + (I − U Uᵀ) G V S⁻¹ Vᵀ,  K_ij = (X_ij − X_ji)/(σ_i + σ_j),
/// with X = Uᵀ G V. Denominators are clamped below at kProcrustesClamp.
Var procrustes_project(const Var& a);

inline constexpr double kProcrustesClamp = 1e-8;

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

}  // namespace niso
