#pragma once

#include <vector>

#include "niso/autodiff.hpp"

namespace niso {

enum class MaskMode { fuzzy, hard };

/// Multiplicity mask over the eigenvalues.
///
/// fuzzy: P_ij = exp(−|λ_i − λ_j|), differentiable in λ.
/// hard:  P_ij = 1 when i and j fall in the same eigenvalue block, else 0.
struct EigenvalueMask {
  Var matrix;
  MaskMode mode = MaskMode::fuzzy;
  double tolerance = 0.0;
};

/// Estimated basis-space map τ_Ω.
struct IsometricMap {
  Var tau;
  MaskMode mask_mode = MaskMode::fuzzy;
};

/// Groups indices into blocks of (numerically) equal eigenvalues: after sorting,
/// adjacent values closer than `tol` share a block. Blocks are returned in
/// ascending eigenvalue order; indices inside a block are ascending.
std::vector<std::vector<std::size_t>> eigenvalue_blocks(const Tensor& eigvals, double tol);

/// Throws DomainError on negative eigenvalues.
EigenvalueMask eigenvalue_mask(const Var& eigvals, MaskMode mode, double tol = 1e-6);

/// τ_Ω = procrustes_project(P ⊙ (cB·cAᵀ)).
IsometricMap estimate_map(const Var& coeffs_a, const Var& coeffs_b, const EigenvalueMask& mask);

/// Exact minimizer of ||π cA − cB|| over orthogonal, Λ-commuting π: the direct
/// sum of per-block Procrustes solves. Forward-only.
Tensor exact_block_solve(const Tensor& coeffs_a, const Tensor& coeffs_b, const Tensor& eigvals, double tol);

/// ||τ_Ω Λ − Λ τ_Ω||_F.
double commutator_residual(const Tensor& tau, const Tensor& eigvals);

/// τ_Ω⁻¹ = τ_Ωᵀ.
IsometricMap invert_map(const IsometricMap& map);

/// Squared Frobenius mass of the off-diagonal entries relative to the total.
double off_diagonal_fraction(const Tensor& tau);
/// Squared Frobenius mass outside the given block pattern relative to the total.
double off_block_fraction(const Tensor& tau, const std::vector<std::vector<std::size_t>>& blocks);

}  // namespace niso
