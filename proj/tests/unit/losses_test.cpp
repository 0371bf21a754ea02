#include <doctest.h>

#include <array>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numbers>

#include "niso/data_gen.hpp"
#include "niso/error.hpp"
#include "niso/losses.hpp"
#include "oracles.hpp"

using namespace niso;

namespace {

/// Uniform-mass realization whose basis is exactly `basis` (orthonormal columns).
RealizedOperator fixed_operator(Tape& tape, const Tensor& basis, const Tensor& eigvals) {
  Tensor root = eigvals;
  for (double& x : root.storage()) x = std::sqrt(x);
  return realize(tape.constant(Tensor({basis.rows()})), tape.constant(basis), tape.constant(root));
}

/// Real Fourier basis of the n-cycle: 1, cos/sin pairs, Nyquist cosine.
std::pair<Tensor, Tensor> circle_fourier(std::size_t n) {
  Tensor basis({n, n}), eig({n});
  std::size_t col = 0;
  auto put = [&](auto f, double freq) {
    double norm = 0.0;
    for (std::size_t x = 0; x < n; ++x) norm += f(x) * f(x);
    for (std::size_t x = 0; x < n; ++x) basis(x, col) = f(x) / std::sqrt(norm);
    eig[col++] = freq * freq;
  };
  const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
  put([](std::size_t) { return 1.0; }, 0.0);
  for (std::size_t f = 1; 2 * f < n; ++f) {
    put([&](std::size_t x) { return std::cos(w * f * x); }, f);
    put([&](std::size_t x) { return std::sin(w * f * x); }, f);
  }
  if (n % 2 == 0) put([&](std::size_t x) { return std::cos(std::numbers::pi * x); }, n / 2.0);
  return {basis, eig};
}

Tensor roll_rows(const Tensor& f, std::size_t s) {
  Tensor out(f.shape());
  const std::size_t n = f.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f.cols(); ++j) out((i + s) % n, j) = f(i, j);
  return out;
}

double l_m(const Tensor& eig, MaskMode mode) {
  Tape tape;
  return multiplicity_loss(eigenvalue_mask(tape.constant(eig), mode)).item();
}

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("equivariance loss values") {
    Tape tape;
    std::mt19937_64 rng(41);
    const Tensor q = testing::random_orthogonal(4, rng);
    const Tensor ca = testing::random_matrix(4, 3, rng);
    const IsometricMap tau{tape.constant(q), MaskMode::fuzzy};
    CHECK(equivariance_loss(tau, tape.constant(ca), tape.constant(matmul_plain(q, ca))).item() < 1e-12);

    const IsometricMap id{tape.constant(Tensor::identity(2)), MaskMode::fuzzy};
    CHECK(equivariance_loss(id, tape.constant(Tensor({2, 1})), tape.constant(Tensor::matrix({{0}, {3}}))).item() ==
          doctest::Approx(3.0));
    CHECK_THROWS_AS(equivariance_loss(id, tape.constant(Tensor({2, 1})), tape.constant(Tensor({2, 2}))),
                    DimensionError);
  }

  TEST_CASE("equivariance loss gradient") {
    std::mt19937_64 rng(42);
    const Tensor q = testing::random_orthogonal(3, rng);
    Tensor ca = testing::random_matrix(3, 4, rng);
    const Tensor cb = testing::random_matrix(3, 4, rng);
    auto f = [&](const testing::Vec& x) {
      Tape tape;
      return equivariance_loss({tape.constant(q), MaskMode::fuzzy}, tape.constant(Tensor(ca.shape(), x)),
                               tape.constant(cb))
          .item();
    };
    Tape tape;
    ca.requires_grad = true;
    ca.zero_grad();
    tape.backward(equivariance_loss({tape.constant(q), MaskMode::fuzzy}, tape.watch(ca), tape.constant(cb)));
    CHECK(testing::relative_error(ca.grad, testing::central_difference(f, ca.storage())) <= 1e-4);
  }

  TEST_CASE("reconstruction loss") {
    const auto [basis, eig] = circle_fourier(8);
    std::mt19937_64 rng(43);
    Tape tape;
    const RealizedOperator op = fixed_operator(tape, basis, eig);
    const IdentityCodec codec;
    const Tensor psi = testing::random_matrix(8, 3, rng);
    const Var p = tape.constant(psi);
    const IsometricMap id{tape.constant(Tensor::identity(8)), MaskMode::fuzzy};
    CHECK(reconstruction_loss(codec, id, p, p, p, p, op).item() < 1e-6);

    const Tensor q = testing::random_orthogonal(8, rng);
    const OperatorSnapshot snap = snapshot(op);
    const Var tpsi = tape.constant(apply_full_map(q, psi, snap));
    const IsometricMap tau{tape.constant(q), MaskMode::fuzzy};
    CHECK(reconstruction_loss(codec, tau, p, tpsi, p, tpsi, op).item() < 1e-5);

    const Var other = tape.constant(testing::random_matrix(8, 3, rng));
    const double forward = reconstruction_loss(codec, tau, p, other, p, other, op).item();
    const double swapped = reconstruction_loss(codec, invert_map(tau), other, p, other, p, op).item();
    CHECK(forward == doctest::Approx(swapped).epsilon(1e-10));
    CHECK(forward > 0.0);
  }

  TEST_CASE("multiplicity loss closed form") {
    for (std::size_t k : {2u, 4u, 8u}) {
      const double expected = static_cast<double>(k) * std::sqrt(static_cast<double>(k - 1));
      CHECK(std::abs(l_m(Tensor(Shape{k}, 2.5), MaskMode::fuzzy) - expected) <= 1e-10);
    }
    CHECK(l_m(Tensor::vector({0, 1, 2, 3}), MaskMode::hard) == 0.0);
    CHECK(l_m(Tensor::vector({0, 1, 2, 3}), MaskMode::fuzzy) > 0.0);
  }

  TEST_CASE("multiplicity loss decreases as a pair separates") {
    double previous = l_m(Tensor::vector({1, 1}), MaskMode::fuzzy);
    for (int s = 1; s <= 50; ++s) {
      const double current = l_m(Tensor::vector({1, 1 + 0.1 * s}), MaskMode::fuzzy);
      CHECK(current < previous);
      previous = current;
    }
  }

  TEST_CASE("combined loss") {
    Tape tape;
    const Var r = tape.constant(Tensor::scalar(2.0)), e = tape.constant(Tensor::scalar(3.0)),
              m = tape.constant(Tensor::scalar(5.0));
    CHECK(combined_loss({0, 0}, r, e, m).total.item() == 2.0);
    const CombinedLoss c = combined_loss({0.0, 0.1}, r, e, m);
    CHECK(c.report.total == doctest::Approx(2.5));
    CHECK(std::abs(c.report.total - (c.report.reconstruction + 0.0 * c.report.equivariance +
                                     0.1 * c.report.multiplicity)) <= 1e-10);
    const Var z = tape.constant(Tensor::scalar(0.0));
    CHECK(combined_loss({1, 1}, z, z, z).total.item() == 0.0);
    CHECK_THROWS_AS(combined_loss({-1, 0}, r, e, m), ConfigError);
    CHECK_THROWS_AS(combined_loss({0, -0.1}, r, e, m), ConfigError);
  }

  TEST_CASE("triplet losses with commuting shifts") {
    const auto [basis, eig] = circle_fourier(8);
    std::mt19937_64 rng(44);
    Tape tape;
    const RealizedOperator op = fixed_operator(tape, basis, eig);
    const OperatorSnapshot snap = snapshot(op);
    const IdentityCodec codec;
    const Tensor psi = testing::random_matrix(8, 10, rng);
    const std::array<Tensor, 3> frames{psi, roll_rows(psi, 3), roll_rows(psi, 6)};
    std::array<Var, 3> obs, coeffs;
    for (int i = 0; i < 3; ++i) {
      obs[i] = tape.constant(frames[i]);
      coeffs[i] = tape.constant(project(frames[i], snap));
    }
    const auto mask = eigenvalue_mask(op.eigvals, MaskMode::hard);
    const IsometricMap tau = estimate_map(coeffs[0], coeffs[1], mask);
    const IsometricMap sigma = estimate_map(coeffs[1], coeffs[2], mask);
    const TripletLosses t = triplet_losses(codec, tau, sigma, coeffs, obs, obs, op);
    const double pairwise = equivariance_loss(tau, coeffs[0], coeffs[1]).item() +
                            reconstruction_loss(codec, tau, obs[0], obs[1], obs[0], obs[1], op).item();
    CHECK(t.equivariance.item() + t.reconstruction.item() <= pairwise + 1e-6);

    std::array<Var, 3> bad_obs = obs, bad_coeffs = coeffs;
    const Tensor noise = testing::random_matrix(8, 10, rng);
    bad_obs[2] = tape.constant(noise);
    bad_coeffs[2] = tape.constant(project(noise, snap));
    const TripletLosses b = triplet_losses(codec, tau, sigma, bad_coeffs, bad_obs, bad_obs, op);
    CHECK(b.equivariance.item() > 0.0);
    CHECK(b.reconstruction.item() > 0.0);

    const std::array<Var, 2> two{obs[0], obs[1]};
    CHECK_THROWS_AS(triplet_losses(codec, tau, sigma, two, two, two, op), UsageError);
  }

  TEST_CASE("spectral dropout draws") {
    std::mt19937_64 rng(45);
    CHECK_THROWS_AS(sample_spectral_dropout(1, rng), ConfigError);
    Tape tape;
    const Tensor c = testing::random_matrix(5, 2, rng);
    CHECK(max_abs_diff(apply_spectral_dropout(tape.constant(c), DropoutDraw{}).value(), c) == 0.0);
    const Tensor one = apply_spectral_dropout(tape.constant(c), DropoutDraw{1}).value();
    for (std::size_t j = 0; j < 2; ++j) CHECK(one(0, j) == c(0, j));
    for (std::size_t i = 1; i < 5; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(one(i, j) == 0.0);
  }

  TEST_CASE("spectral dropout statistics") {
    constexpr std::size_t k = 16, draws = 100000;
    std::mt19937_64 rng(46);
    std::vector<double> counts(k - 1, 0.0);
    std::size_t triggered = 0;
    for (std::size_t i = 0; i < draws; ++i) {
      const DropoutDraw d = sample_spectral_dropout(k, rng);
      if (!d.triggered()) continue;
      ++triggered;
      REQUIRE(d.keep_rows >= 1);
      REQUIRE(d.keep_rows <= k - 1);
      counts[d.keep_rows - 1] += 1.0;
    }
    CHECK(std::abs(static_cast<double>(triggered) / draws - 0.5) <= 0.01);
    const double expected = static_cast<double>(triggered) / (k - 1);
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const boost::math::chi_squared dist(static_cast<double>(k - 2));
    CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
  }
}
