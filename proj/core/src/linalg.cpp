#include "niso/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "niso/error.hpp"

namespace niso {
namespace {

// Column-major working copy so Jacobi rotations stream contiguous memory.
struct ColumnMajor {
  std::size_t rows, cols;
  std::vector<double> data;
  double* col(std::size_t j) { return data.data() + j * rows; }
  const double* col(std::size_t j) const { return data.data() + j * rows; }
};

Svd tall_svd(const Tensor& a) {
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  ColumnMajor w{m, n, std::vector<double>(m * n)};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) w.data[j * m + i] = a(i, j);
  ColumnMajor v{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) v.data[j * n + j] = 1.0;

  const int max_sweeps = static_cast<int>(100 * n);
  int sweep = 0;
  bool converged = n < 2;
  while (!converged) {
    if (sweep >= max_sweeps) {
      throw NumericalError("Jacobi SVD did not converge after " + std::to_string(sweep) + " sweeps");
    }
    ++sweep;
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* wp = w.col(p);
        double* wq = w.col(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += wp[i] * wp[i];
          beta += wq[i] * wq[i];
          gamma += wp[i] * wq[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= kJacobiTolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = wp[i], y = wq[i];
          wp[i] = c * x - s * y;
          wq[i] = s * x + c * y;
        }
        double* vp = v.col(p);
        double* vq = v.col(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i], y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    converged = !rotated;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double* col = w.col(j);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += col[i] * col[i];
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return sigma[x] > sigma[y]; });

  const double smax = n ? sigma[order[0]] : 0.0;
  const double null_threshold = smax * 1e-13 * static_cast<double>(m);
  Svd out{Tensor({m, n}), Tensor({n}), Tensor({n, n}), sweep};
  std::size_t filled = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = order[r];
    out.s[r] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, r) = v.col(j)[i];
    if (sigma[j] > null_threshold && sigma[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, r) = w.col(j)[i] / sigma[j];
      ++filled;
    }
  }
  if (filled < n) out.u = complete_orthonormal(out.u, filled, n);
  return out;
}

}  // namespace

Tensor complete_orthonormal(const Tensor& basis, std::size_t filled, std::size_t target) {
  const std::size_t m = basis.shape()[0];
  Tensor out = basis;
  std::vector<double> candidate(m);
  std::size_t next = filled;
  for (std::size_t e = 0; e < m && next < target; ++e) {
    std::fill(candidate.begin(), candidate.end(), 0.0);
    candidate[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t c = 0; c < next; ++c) {
        double dot = 0.0;
        for (std::size_t i = 0; i < m; ++i) dot += out(i, c) * candidate[i];
        for (std::size_t i = 0; i < m; ++i) candidate[i] -= dot * out(i, c);
      }
    }
    double norm = 0.0;
    for (double x : candidate) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 0.5) continue;
    for (std::size_t i = 0; i < m; ++i) out(i, next) = candidate[i] / norm;
    ++next;
  }
  return out;
}

Svd svd(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("svd needs a matrix, got " + to_string(a.shape()));
  for (double x : a.data()) {
    if (!std::isfinite(x)) throw NumericalError("svd input has non-finite entries");
  }
  if (a.shape()[0] >= a.shape()[1]) return tall_svd(a);
  Svd t = tall_svd(a.transposed());
  return Svd{std::move(t.v), std::move(t.s), std::move(t.u), t.sweeps};
}

Tensor polar_factor(const Tensor& a) {
  const Svd d = svd(a);
  return matmul_plain(d.u, d.v.transposed());
}

}  // namespace niso
