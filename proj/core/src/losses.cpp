#include "niso/losses.hpp"

#include "niso/error.hpp"

namespace niso {

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ConfigError("loss weights must be non-negative (alpha=" + std::to_string(alpha) +
                      ", beta=" + std::to_string(beta) + ")");
  }
}

Var equivariance_loss(const IsometricMap& tau, const Var& coeffs_a, const Var& coeffs_b) {
  if (coeffs_a.shape() != coeffs_b.shape()) {
    throw DimensionError("equivariance_loss: coefficient shapes " + to_string(coeffs_a.shape()) + " and " +
                         to_string(coeffs_b.shape()) + " differ");
  }
  return frobenius_norm(matmul(tau.tau, coeffs_a) - coeffs_b);
}

DropoutDraw sample_spectral_dropout(std::size_t k, std::mt19937_64& rng) {
  if (k < 2) throw ConfigError("spectral dropout needs k >= 2, got " + std::to_string(k));
  std::bernoulli_distribution trigger(0.5);
  if (!trigger(rng)) return DropoutDraw{};
  std::uniform_int_distribution<std::size_t> index(2, k);
  return DropoutDraw{index(rng) - 1};
}

Var apply_spectral_dropout(const Var& coeffs, const DropoutDraw& draw) {
  if (!draw.triggered()) return coeffs;
  const Tensor& c = coeffs.value();
  Tensor keep(c.shape());
  const std::size_t cols = c.cols();
  for (std::size_t r = 0; r < std::min(draw.keep_rows, c.rows()); ++r)
    for (std::size_t j = 0; j < cols; ++j) keep[r * cols + j] = 1.0;
  return mul(coeffs, coeffs.tape().constant(std::move(keep)));
}

Var spectral_dropout(const Var& coeffs, std::mt19937_64& rng) {
  return apply_spectral_dropout(coeffs, sample_spectral_dropout(coeffs.value().rows(), rng));
}

namespace {

Var mapped_reconstruction(const Codec& codec, const Var& tau, const Var& latent, const Var& target,
                          const RealizedOperator& op, const DropoutDraw* dropout) {
  Var coeffs = matmul(tau, project(latent, op));
  if (dropout) coeffs = apply_spectral_dropout(coeffs, *dropout);
  Var decoded = codec.decode(unproject(coeffs, op));
  if (decoded.shape() != target.shape()) {
    throw DimensionError("reconstruction: decoded shape " + to_string(decoded.shape()) + " vs target " +
                         to_string(target.shape()));
  }
  return frobenius_norm(decoded - target);
}

}  // namespace

Var reconstruction_loss(const Codec& codec, const IsometricMap& tau, const Var& latent_a, const Var& latent_b,
                        const Var& obs_a, const Var& obs_b, const RealizedOperator& op,
                        const DropoutDraw* dropout) {
  const IsometricMap inverse = invert_map(tau);
  return mapped_reconstruction(codec, tau.tau, latent_a, obs_b, op, dropout) +
         mapped_reconstruction(codec, inverse.tau, latent_b, obs_a, op, dropout);
}

Var multiplicity_loss(const EigenvalueMask& mask) {
  const Var& p = mask.matrix;
  return frobenius_norm(diag(row_sums(p)) - p);
}

CombinedLoss combined_loss(const LossWeights& weights, const Var& reconstruction, const Var& equivariance,
                           const Var& multiplicity) {
  weights.validate();
  Var total = reconstruction + weights.alpha * equivariance + weights.beta * multiplicity;
  LossReport report;
  report.reconstruction = reconstruction.item();
  report.equivariance = equivariance.item();
  report.multiplicity = multiplicity.item();
  report.total = total.item();
  return CombinedLoss{total, report};
}

TripletLosses triplet_losses(const Codec& codec, const IsometricMap& tau, const IsometricMap& sigma,
                             std::span<const Var> coeffs, std::span<const Var> latents,
                             std::span<const Var> observations, const RealizedOperator& op,
                             const DropoutDraw* dropout) {
  if (coeffs.size() != 3 || latents.size() != 3 || observations.size() != 3) {
    throw UsageError("triplet losses need (ψ, Tψ, T²ψ); got " + std::to_string(observations.size()) +
                     " observations");
  }
  Var equiv = equivariance_loss(sigma, coeffs[0], coeffs[1]) + equivariance_loss(tau, coeffs[1], coeffs[2]);
  Var recon = mapped_reconstruction(codec, sigma.tau, latents[0], observations[1], op, dropout) +
              mapped_reconstruction(codec, tau.tau, latents[1], observations[2], op, dropout);
  return TripletLosses{equiv, recon};
}

}  // namespace niso
