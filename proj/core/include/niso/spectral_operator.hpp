#pragma once

#include <cstdint>
#include <random>

#include "niso/autodiff.hpp"
#include "niso/tensor.hpp"

namespace niso {

enum class BasisInit { random, identity };

struct OperatorInit {
  BasisInit basis = BasisInit::random;
  /// raw eigenvalue parameters are drawn from N(0, eigval_scale²).
  double eigval_scale = 0.1;
};

/// Trainable parameters of the mass matrix and the low-rank operator:
/// raw_mass [n], raw_basis [n×k], raw_eigvals [k].
class SpectralOperatorParams {
 public:
  static constexpr const char* kRawMass = "raw_mass";
  static constexpr const char* kRawBasis = "raw_basis";
  static constexpr const char* kRawEigvals = "raw_eigvals";

  SpectralOperatorParams(std::size_t n, std::size_t k, const OperatorInit& init, std::mt19937_64& rng);
  /// Adopts existing raw values (e.g. from a checkpoint). Shapes are validated.
  SpectralOperatorParams(Tensor raw_mass, Tensor raw_basis, Tensor raw_eigvals);

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }

  Parameter& raw_mass() { return params_.at(kRawMass); }
  Parameter& raw_basis() { return params_.at(kRawBasis); }
  Parameter& raw_eigvals() { return params_.at(kRawEigvals); }
  const Parameter& raw_mass() const { return params_.at(kRawMass); }
  const Parameter& raw_basis() const { return params_.at(kRawBasis); }
  const Parameter& raw_eigvals() const { return params_.at(kRawEigvals); }

  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

 private:
  void validate() const;

  std::size_t n_ = 0;
  std::size_t k_ = 0;
  ParameterSet params_;
};

/// Mass diagonal, M-orthonormal eigenfunctions and non-negative eigenvalues,
/// as nodes on a tape.
struct RealizedOperator {
  Var mass;     // [n], positive, mean 1
  Var basis;    // [n×k], ΦᵀMΦ = I
  Var eigvals;  // [k], ≥ 0
};

/// Forward-only copy of a realized operator.
struct OperatorSnapshot {
  Tensor mass;
  Tensor basis;
  Tensor eigvals;

  std::size_t n() const { return mass.size(); }
  std::size_t k() const { return eigvals.size(); }
};

/// mass = softplus(raw_mass)/mean(softplus(raw_mass));
/// Φ = M^{-1/2}·polar(M^{1/2}·raw_basis); eigvals = raw_eigvals².
RealizedOperator realize(Tape& tape, SpectralOperatorParams& params);
/// Same map applied to raw values already recorded on a tape.
RealizedOperator realize(const Var& raw_mass, const Var& raw_basis, const Var& raw_eigvals);
OperatorSnapshot realize_values(const SpectralOperatorParams& params);
OperatorSnapshot snapshot(const RealizedOperator& op);

/// Coefficients Φᵀ M f of an [n×d] latent function.
Var project(const Var& f, const RealizedOperator& op);
/// Latent function Φ c from [k×d] coefficients.
Var unproject(const Var& c, const RealizedOperator& op);
/// Φ τ_Ω Φᵀ M f.
Var apply_full_map(const Var& tau_basis, const Var& f, const RealizedOperator& op);

Tensor project(const Tensor& f, const OperatorSnapshot& op);
Tensor unproject(const Tensor& c, const OperatorSnapshot& op);
Tensor apply_full_map(const Tensor& tau_basis, const Tensor& f, const OperatorSnapshot& op);

/// Dense Ω = Φ Λ Φᵀ M. Visualization and tests only.
Tensor operator_matrix(const OperatorSnapshot& op);
/// Spatial map τ = Φ τ_Ω Φᵀ M.
Tensor spatial_map(const Tensor& tau_basis, const OperatorSnapshot& op);

}  // namespace niso
