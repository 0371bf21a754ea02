#include <doctest.h>

#include "niso/data_gen.hpp"
#include "niso/error.hpp"
#include "niso/linalg.hpp"
#include "niso/spectral_operator.hpp"
#include "oracles.hpp"

using namespace niso;

namespace {

SpectralOperatorParams random_params(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  return SpectralOperatorParams(testing::random_matrix(n, 1, rng).reshaped({n}), testing::random_matrix(n, k, rng),
                                testing::random_matrix(k, 1, rng).reshaped({k}));
}

/// ||ΦᵀMΦ − I||_F.
double m_orthogonality(const OperatorSnapshot& op) {
  Tensor mphi = op.basis;
  for (std::size_t i = 0; i < op.n(); ++i)
    for (std::size_t j = 0; j < op.k(); ++j) mphi(i, j) *= op.mass[i];
  Tensor g = matmul_plain(op.basis.transposed(), mphi);
  for (std::size_t i = 0; i < op.k(); ++i) g(i, i) -= 1.0;
  return frobenius(g);
}

Tensor diag_matrix(const Tensor& v) {
  Tensor d({v.size(), v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) d(i, i) = v[i];
  return d;
}

}  // namespace

TEST_SUITE("spectral_operator") {
  TEST_CASE("k larger than n is a configuration error") {
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(SpectralOperatorParams(4, 5, OperatorInit{}, rng), ConfigError);
    CHECK_THROWS_AS(SpectralOperatorParams(Tensor({4}), Tensor({4, 5}), Tensor({5})), ConfigError);
  }

  TEST_CASE("identity columns and zero mass realize unchanged") {
    Tensor basis({5, 3});
    for (std::size_t j = 0; j < 3; ++j) basis(j, j) = 1.0;
    const SpectralOperatorParams p(Tensor({5}), basis, Tensor::vector({-2, 3, 0.5}));
    const OperatorSnapshot op = realize_values(p);
    for (double m : op.mass.data()) CHECK(m == doctest::Approx(1.0));
    CHECK(max_abs_diff(op.basis, basis) < 1e-12);
    CHECK(op.eigvals[0] == doctest::Approx(4.0));
    CHECK(op.eigvals[1] == doctest::Approx(9.0));
  }

  TEST_CASE("realized basis is M-orthonormal and mass has unit mean") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const OperatorSnapshot op = realize_values(random_params(12, 5, rng));
      CHECK(m_orthogonality(op) <= 1e-6);
      double mean = 0.0;
      for (double m : op.mass.data()) {
        CHECK(m > 0.0);
        mean += m;
      }
      CHECK(mean / 12.0 == doctest::Approx(1.0).epsilon(1e-12));
      for (double l : op.eigvals.data()) CHECK(l >= 0.0);
    }
  }

  TEST_CASE("project and unproject") {
    std::mt19937_64 rng(3);
    Tensor basis({6, 6});
    for (std::size_t j = 0; j < 6; ++j) basis(j, j) = 1.0;
    const OperatorSnapshot uniform = realize_values(SpectralOperatorParams(Tensor({6}), basis, Tensor({6})));
    Tensor first({6, 1});
    for (std::size_t i = 0; i < 6; ++i) first(i, 0) = uniform.basis(i, 0);
    const Tensor c = project(first, uniform);
    CHECK(c(0, 0) == doctest::Approx(1.0));
    for (std::size_t i = 1; i < 6; ++i) CHECK(std::abs(c(i, 0)) < 1e-6);
    CHECK(frobenius(project(Tensor({6, 2}), uniform)) == 0.0);
    CHECK(frobenius(unproject(Tensor({6, 2}), uniform)) == 0.0);

    const OperatorSnapshot full = realize_values(random_params(6, 6, rng));
    const Tensor f = testing::random_matrix(6, 3, rng);
    CHECK(max_abs_diff(unproject(project(f, full), full), f) < 1e-6);

    const OperatorSnapshot low = realize_values(random_params(9, 4, rng));
    const Tensor cc = testing::random_matrix(4, 3, rng);
    CHECK(max_abs_diff(project(unproject(cc, low), low), cc) < 1e-6);
    CHECK_THROWS_AS(project(Tensor({5, 2}), low), DimensionError);
    CHECK_THROWS_AS(unproject(Tensor({5, 2}), low), DimensionError);
  }

  TEST_CASE("operator matrix") {
    Tensor basis({3, 3});
    for (std::size_t j = 0; j < 3; ++j) basis(j, j) = 1.0;
    const OperatorSnapshot op = realize_values(SpectralOperatorParams(Tensor({3}), basis, Tensor::vector({1, 2, 3})));
    CHECK(max_abs_diff(operator_matrix(op), diag_matrix(Tensor::vector({1, 4, 9}))) < 1e-12);

    std::mt19937_64 rng(4);
    const OperatorSnapshot r = realize_values(random_params(8, 3, rng));
    const Tensor omega = operator_matrix(r);
    const Tensor m = diag_matrix(r.mass);
    CHECK(max_abs_diff(matmul_plain(m, omega), matmul_plain(omega.transposed(), m)) < 1e-6);
    std::size_t rank = 0;
    for (double s : svd(omega).s.data()) rank += s > 1e-8;
    CHECK(rank <= 3);
  }

  TEST_CASE("apply_full_map") {
    std::mt19937_64 rng(5);
    const OperatorSnapshot op = realize_values(random_params(5, 5, rng));
    const Tensor f = testing::random_matrix(5, 2, rng);
    CHECK(max_abs_diff(apply_full_map(Tensor::identity(5), f, op), f) < 1e-6);
    CHECK(frobenius(apply_full_map(Tensor({5, 5}), f, op)) == 0.0);
    CHECK_THROWS_AS(apply_full_map(Tensor::identity(4), f, op), DimensionError);

    const Tensor q = testing::random_orthogonal(5, rng);
    const Tensor tau = spatial_map(q, op);
    const Tensor m = diag_matrix(op.mass);
    CHECK(max_abs_diff(matmul_plain(matmul_plain(tau.transposed(), m), tau), m) < 1e-5);
  }
}
