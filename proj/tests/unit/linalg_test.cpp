#include <doctest.h>

#include "niso/error.hpp"
#include "niso/linalg.hpp"
#include "oracles.hpp"

using namespace niso;

namespace {

Tensor reconstruct(const Svd& d) {
  Tensor us = d.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= d.s[j];
  return matmul_plain(us, d.v.transposed());
}

}  // namespace

TEST_SUITE("linalg") {
  TEST_CASE("svd of simple matrices") {
    Svd d = svd(Tensor::identity(3));
    for (std::size_t i = 0; i < 3; ++i) CHECK(d.s[i] == doctest::Approx(1.0));
    d = svd(Tensor::matrix({{3, 0}, {0, 2}}));
    CHECK(d.s[0] == doctest::Approx(3.0));
    CHECK(d.s[1] == doctest::Approx(2.0));
    d = svd(Tensor::matrix({{2, 0}, {0, 3}}));
    CHECK(d.s[0] == doctest::Approx(3.0));
  }

  TEST_CASE("svd reconstructs random matrices") {
    std::mt19937_64 rng(21);
    for (auto [m, n] : {std::pair{8, 8}, {9, 4}, {3, 7}, {1, 5}}) {
      for (int trial = 0; trial < 10; ++trial) {
        const Tensor a = testing::random_matrix(m, n, rng);
        const Svd d = svd(a);
        CHECK(max_abs_diff(reconstruct(d), a) <= 1e-10 * frobenius(a));
        CHECK(orthogonality_residual(d.u) < 1e-10);
        CHECK(orthogonality_residual(d.v) < 1e-10);
        for (std::size_t i = 1; i < d.s.size(); ++i) CHECK(d.s[i - 1] >= d.s[i]);
        for (double s : d.s.data()) CHECK(s >= 0.0);
      }
    }
  }

  TEST_CASE("svd completes null singular vectors") {
    Tensor a({4, 4});
    a(0, 1) = 2.0;
    const Svd d = svd(a);
    CHECK(orthogonality_residual(d.u) < 1e-12);
    CHECK(orthogonality_residual(d.v) < 1e-12);
    CHECK(d.s[1] == 0.0);
  }

  TEST_CASE("svd rejects non-finite input") {
    Tensor a = Tensor::identity(2);
    a(0, 1) = NAN;
    CHECK_THROWS_AS(svd(a), NumericalError);
  }

  TEST_CASE("polar factor is idempotent and orthogonal") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor a = testing::random_matrix(6, 6, rng);
      const Tensor q = polar_factor(a);
      CHECK(orthogonality_residual(q) <= 1e-8);
      CHECK(max_abs_diff(polar_factor(q), q) <= 1e-10);
    }
  }
}
