#include "niso/spectral_operator.hpp"

#include <cmath>

#include "niso/error.hpp"

namespace niso {

SpectralOperatorParams::SpectralOperatorParams(std::size_t n, std::size_t k, const OperatorInit& init,
                                               std::mt19937_64& rng)
    : n_(n), k_(k) {
  if (n == 0 || k == 0) throw ConfigError("operator needs n > 0 and k > 0");
  if (k > n) throw ConfigError("spectral rank k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  Tensor basis({n, k});
  if (init.basis == BasisInit::identity) {
    for (std::size_t j = 0; j < k; ++j) basis(j, j) = 1.0;
  } else {
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
    for (double& x : basis.storage()) x = gauss(rng);
  }
  Tensor eig({k});
  if (init.eigval_scale > 0.0) {
    std::normal_distribution<double> gauss(0.0, init.eigval_scale);
    for (double& x : eig.storage()) x = gauss(rng);
  }
  params_.add(kRawMass, Tensor({n}));
  params_.add(kRawBasis, std::move(basis));
  params_.add(kRawEigvals, std::move(eig));
}

SpectralOperatorParams::SpectralOperatorParams(Tensor raw_mass, Tensor raw_basis, Tensor raw_eigvals) {
  if (raw_basis.rank() != 2) throw ConfigError("raw_basis must be a matrix, got " + to_string(raw_basis.shape()));
  n_ = raw_basis.shape()[0];
  k_ = raw_basis.shape()[1];
  params_.add(kRawMass, std::move(raw_mass));
  params_.add(kRawBasis, std::move(raw_basis));
  params_.add(kRawEigvals, std::move(raw_eigvals));
  validate();
}

void SpectralOperatorParams::validate() const {
  if (k_ > n_) throw ConfigError("spectral rank k=" + std::to_string(k_) + " exceeds n=" + std::to_string(n_));
  if (raw_mass().tensor.size() != n_ || raw_mass().tensor.rank() != 1) {
    throw ConfigError("raw_mass must have shape [" + std::to_string(n_) + "]");
  }
  if (raw_eigvals().tensor.size() != k_ || raw_eigvals().tensor.rank() != 1) {
    throw ConfigError("raw_eigvals must have shape [" + std::to_string(k_) + "]");
  }
  for (const auto& p : params_) {
    for (double x : p.tensor.data()) {
      if (!std::isfinite(x)) throw ConfigError("parameter '" + p.name + "' has non-finite entries");
    }
  }
}

RealizedOperator realize(Tape& tape, SpectralOperatorParams& params) {
  for (const auto& p : params.parameters()) {
    for (double x : p.tensor.data()) {
      if (!std::isfinite(x)) throw NumericalError("parameter '" + p.name + "' has non-finite entries");
    }
  }
  return realize(tape.watch(params.raw_mass()), tape.watch(params.raw_basis()), tape.watch(params.raw_eigvals()));
}

RealizedOperator realize(const Var& raw_mass, const Var& raw_basis, const Var& raw_eig) {
  Var positive = softplus(raw_mass);
  Var mass = mul(positive, reciprocal(mean(positive)));
  Var root = sqrt(mass);
  Var frame = procrustes_project(scale_rows(raw_basis, root));
  Var basis = scale_rows(frame, reciprocal(root));
  return RealizedOperator{mass, basis, square(raw_eig)};
}

OperatorSnapshot snapshot(const RealizedOperator& op) {
  return OperatorSnapshot{op.mass.value(), op.basis.value(), op.eigvals.value()};
}

OperatorSnapshot realize_values(const SpectralOperatorParams& params) {
  SpectralOperatorParams copy(params.raw_mass().tensor, params.raw_basis().tensor, params.raw_eigvals().tensor);
  Tape tape;
  return snapshot(realize(tape, copy));
}

namespace {

void require_rows(const Tensor& t, std::size_t rows, const char* what) {
  if (t.rank() != 2 || t.shape()[0] != rows) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + " rows, got shape " +
                         to_string(t.shape()));
  }
}

}  // namespace

Var project(const Var& f, const RealizedOperator& op) {
  require_rows(f.value(), op.mass.value().size(), "project");
  return matmul(transpose(op.basis), scale_rows(f, op.mass));
}

Var unproject(const Var& c, const RealizedOperator& op) {
  require_rows(c.value(), op.eigvals.value().size(), "unproject");
  return matmul(op.basis, c);
}

Var apply_full_map(const Var& tau_basis, const Var& f, const RealizedOperator& op) {
  const auto k = op.eigvals.value().size();
  const auto& t = tau_basis.value();
  if (t.rank() != 2 || t.shape()[0] != k || t.shape()[1] != k) {
    throw DimensionError("apply_full_map: tau must be " + std::to_string(k) + "x" + std::to_string(k) + ", got " +
                         to_string(t.shape()));
  }
  return unproject(matmul(tau_basis, project(f, op)), op);
}

Tensor project(const Tensor& f, const OperatorSnapshot& op) {
  require_rows(f, op.n(), "project");
  Tensor weighted = f;
  const std::size_t d = f.shape()[1];
  for (std::size_t i = 0; i < op.n(); ++i)
    for (std::size_t j = 0; j < d; ++j) weighted(i, j) *= op.mass[i];
  return matmul_plain(op.basis.transposed(), weighted);
}

Tensor unproject(const Tensor& c, const OperatorSnapshot& op) {
  require_rows(c, op.k(), "unproject");
  return matmul_plain(op.basis, c);
}

Tensor apply_full_map(const Tensor& tau_basis, const Tensor& f, const OperatorSnapshot& op) {
  if (tau_basis.rank() != 2 || tau_basis.shape()[0] != op.k() || tau_basis.shape()[1] != op.k()) {
    throw DimensionError("apply_full_map: tau shape " + to_string(tau_basis.shape()));
  }
  return unproject(matmul_plain(tau_basis, project(f, op)), op);
}

Tensor operator_matrix(const OperatorSnapshot& op) {
  const std::size_t n = op.n(), k = op.k();
  Tensor right({k, n});  // Λ Φᵀ M
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t i = 0; i < n; ++i) right(a, i) = op.eigvals[a] * op.basis(i, a) * op.mass[i];
  return matmul_plain(op.basis, right);
}

Tensor spatial_map(const Tensor& tau_basis, const OperatorSnapshot& op) {
  const std::size_t n = op.n(), k = op.k();
  Tensor right({k, n});  // Φᵀ M
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t i = 0; i < n; ++i) right(a, i) = op.basis(i, a) * op.mass[i];
  return matmul_plain(matmul_plain(op.basis, tau_basis), right);
}

}  // namespace niso
