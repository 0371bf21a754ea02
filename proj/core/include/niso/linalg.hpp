#pragma once

#include "niso/tensor.hpp"

namespace niso {

/// Thin singular value decomposition a = U diag(S) Vᵀ.
///
/// For an m×n input with r = min(m, n): U is m×r, S has r entries sorted in
/// descending order, V is n×r. Columns of U and V are orthonormal; singular
/// vectors belonging to zero singular values are completed to an orthonormal
/// set.
struct Svd {
  Tensor u;
  Tensor s;
  Tensor v;
  int sweeps = 0;
};

inline constexpr double kJacobiTolerance = 1e-12;

/// One-sided (Hestenes) cyclic Jacobi SVD. Forward-only.
///
/// Throws NumericalError if the off-diagonal mass has not dropped below
/// kJacobiTolerance after 100·n sweeps, or if the input is not finite.
Svd svd(const Tensor& a);

/// Orthogonal polar factor U Vᵀ (no gradient).
Tensor polar_factor(const Tensor& a);

/// Returns a copy of `a` with the columns of `basis` (assumed orthonormal)
/// extended by Gram-Schmidt over the standard basis until it has `target`
/// columns.
Tensor complete_orthonormal(const Tensor& basis, std::size_t filled, std::size_t target);

}  // namespace niso
