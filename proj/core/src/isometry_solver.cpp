#include "niso/isometry_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "niso/error.hpp"
#include "niso/linalg.hpp"

namespace niso {

std::vector<std::vector<std::size_t>> eigenvalue_blocks(const Tensor& eigvals, double tol) {
  const std::size_t k = eigvals.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return eigvals[a] < eigvals[b]; });
  std::vector<std::vector<std::size_t>> blocks;
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    if (r == 0 || !(eigvals[i] - eigvals[order[r - 1]] < tol)) blocks.emplace_back();
    blocks.back().push_back(i);
  }
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  return blocks;
}

EigenvalueMask eigenvalue_mask(const Var& eigvals, MaskMode mode, double tol) {
  const Tensor& lam = eigvals.value();
  if (lam.rank() > 1) throw DimensionError("eigenvalues must be a vector, got " + to_string(lam.shape()));
  for (double x : lam.data()) {
    if (x < 0.0) throw DomainError("negative eigenvalue " + std::to_string(x) + " in multiplicity mask");
  }
  if (mode == MaskMode::fuzzy) {
    return EigenvalueMask{exp(neg(abs(outer_diff(eigvals)))), mode, 0.0};
  }
  const std::size_t k = lam.size();
  Tensor p({k, k});
  for (const auto& block : eigenvalue_blocks(lam, tol))
    for (auto i : block)
      for (auto j : block) p(i, j) = 1.0;
  return EigenvalueMask{eigvals.tape().constant(std::move(p)), mode, tol};
}

IsometricMap estimate_map(const Var& coeffs_a, const Var& coeffs_b, const EigenvalueMask& mask) {
  const Tensor& a = coeffs_a.value();
  const Tensor& b = coeffs_b.value();
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw DimensionError("estimate_map: coefficient shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " differ");
  }
  const std::size_t k = a.shape()[0];
  const Shape& ps = mask.matrix.value().shape();
  if (ps.size() != 2 || ps[0] != k || ps[1] != k) {
    throw DimensionError("estimate_map: mask " + to_string(ps) + " does not match k=" + std::to_string(k));
  }
  Var cross = matmul(coeffs_b, transpose(coeffs_a));
  return IsometricMap{procrustes_project(mul(mask.matrix, cross)), mask.mode};
}

Tensor exact_block_solve(const Tensor& coeffs_a, const Tensor& coeffs_b, const Tensor& eigvals, double tol) {
  if (coeffs_a.rank() != 2 || coeffs_a.shape() != coeffs_b.shape()) {
    throw DimensionError("exact_block_solve: coefficient shapes " + to_string(coeffs_a.shape()) + " and " +
                         to_string(coeffs_b.shape()) + " differ");
  }
  const std::size_t k = coeffs_a.shape()[0], d = coeffs_a.shape()[1];
  if (eigvals.size() != k) throw DimensionError("exact_block_solve: eigenvalue count does not match k");
  Tensor tau({k, k});
  for (const auto& block : eigenvalue_blocks(eigvals, tol)) {
    const std::size_t m = block.size();
    Tensor cross({m, m});  // B_i A_iᵀ
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < m; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += coeffs_b(block[r], j) * coeffs_a(block[c], j);
        cross(r, c) = s;
      }
    const Tensor q = polar_factor(cross);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < m; ++c) tau(block[r], block[c]) = q(r, c);
  }
  return tau;
}

double commutator_residual(const Tensor& tau, const Tensor& eigvals) {
  const std::size_t k = eigvals.size();
  if (tau.rank() != 2 || tau.shape()[0] != k || tau.shape()[1] != k) {
    throw DimensionError("commutator_residual: tau shape " + to_string(tau.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double r = tau(i, j) * (eigvals[j] - eigvals[i]);
      s += r * r;
    }
  return std::sqrt(s);
}

IsometricMap invert_map(const IsometricMap& map) { return IsometricMap{transpose(map.tau), map.mask_mode}; }

double off_diagonal_fraction(const Tensor& tau) {
  double total = 0.0, off = 0.0;
  for (std::size_t i = 0; i < tau.rows(); ++i)
    for (std::size_t j = 0; j < tau.cols(); ++j) {
      const double v = tau(i, j) * tau(i, j);
      total += v;
      if (i != j) off += v;
    }
  return total > 0.0 ? off / total : 0.0;
}

double off_block_fraction(const Tensor& tau, const std::vector<std::vector<std::size_t>>& blocks) {
  std::vector<std::size_t> label(tau.rows(), 0);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (auto i : blocks[b]) label[i] = b;
  double total = 0.0, off = 0.0;
  for (std::size_t i = 0; i < tau.rows(); ++i)
    for (std::size_t j = 0; j < tau.cols(); ++j) {
      const double v = tau(i, j) * tau(i, j);
      total += v;
      if (label[i] != label[j]) off += v;
    }
  return total > 0.0 ? off / total : 0.0;
}

}  // namespace niso
