#pragma once

#include <cstddef>
#include <random>

#include "niso/autodiff.hpp"
#include "niso/isometry_solver.hpp"
#include "niso/spectral_operator.hpp"

namespace niso {

/// Encoder/decoder pair between observations and latent functions.
class Codec {
 public:
  virtual ~Codec() = default;
  virtual Var encode(const Var& observation) const = 0;
  virtual Var decode(const Var& latent) const = 0;
};

/// Observations are their own latents ([n×d] in, [n×d] out).
class IdentityCodec final : public Codec {
 public:
  Var encode(const Var& observation) const override { return observation; }
  Var decode(const Var& latent) const override { return latent; }
};

struct LossWeights {
  double alpha = 0.0;  // equivariance
  double beta = 0.0;   // multiplicity

  void validate() const;
};

struct LossReport {
  double total = 0.0;
  double equivariance = 0.0;
  double reconstruction = 0.0;
  double multiplicity = 0.0;
  double commutator_residual = 0.0;
  double orthogonality_residual = 0.0;
};

/// ||τ_Ω cA − cB||_F.
Var equivariance_loss(const IsometricMap& tau, const Var& coeffs_a, const Var& coeffs_b);

/// Outcome of one spectral-dropout draw: rows [keep_rows, k) are zeroed.
struct DropoutDraw {
  std::size_t keep_rows = 0;
  bool triggered() const noexcept { return keep_rows > 0; }
};

/// With probability 1/2 picks a 1-based index i uniformly from {2,…,k} and
/// keeps rows 1…i−1; otherwise returns an untriggered draw.
DropoutDraw sample_spectral_dropout(std::size_t k, std::mt19937_64& rng);
Var apply_spectral_dropout(const Var& coeffs, const DropoutDraw& draw);
Var spectral_dropout(const Var& coeffs, std::mt19937_64& rng);

/// ||D(τ E(ψ)) − Tψ|| + ||D(τ⁻¹ E(Tψ)) − ψ|| with τ = Φ τ_Ω Φᵀ M. When
/// `dropout` is given it is applied to the mapped coefficients of both terms
/// before unprojection.
Var reconstruction_loss(const Codec& codec, const IsometricMap& tau, const Var& latent_a, const Var& latent_b,
                        const Var& obs_a, const Var& obs_b, const RealizedOperator& op,
                        const DropoutDraw* dropout = nullptr);

/// Frobenius norm of the mask's graph Laplacian diag(P·1) − P.
Var multiplicity_loss(const EigenvalueMask& mask);

struct CombinedLoss {
  Var total;
  LossReport report;
};

/// L_R + α L_E + β L_M. Diagnostic fields of the report are left at zero.
CombinedLoss combined_loss(const LossWeights& weights, const Var& reconstruction, const Var& equivariance,
                           const Var& multiplicity);

struct TripletLosses {
  Var equivariance;
  Var reconstruction;
};

/// Cross-applied losses for (ψ, Tψ, T²ψ). `tau` was estimated on (ψ, Tψ) and
/// `sigma` on (Tψ, T²ψ):
///   L_E = ||σ_Ω c0 − c1|| + ||τ_Ω c1 − c2||
///   L_R = ||D(σ E(ψ)) − Tψ|| + ||D(τ E(Tψ)) − T²ψ||
/// All span arguments must have exactly three entries.
TripletLosses triplet_losses(const Codec& codec, const IsometricMap& tau, const IsometricMap& sigma,
                             std::span<const Var> coeffs, std::span<const Var> latents,
                             std::span<const Var> observations, const RealizedOperator& op,
                             const DropoutDraw* dropout = nullptr);

}  // namespace niso
