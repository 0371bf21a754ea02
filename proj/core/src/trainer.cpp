#include "niso/trainer.hpp"

#include <cmath>

#include "niso/error.hpp"

namespace niso {

void TrainConfig::validate() const {
  if (steps == 0) throw ConfigError("steps: must be positive");
  if (!(steps > warmup_steps)) throw ConfigError("warmup_steps: must be smaller than steps");
  if (batch_size == 0) throw ConfigError("batch_size: must be positive");
  if (!(lr_final > 0.0)) throw ConfigError("lr_final: must be positive");
  if (!(lr_peak >= lr_final)) throw ConfigError("lr_peak: must be >= lr_final");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay: must be non-negative");
  if (!(weights.alpha >= 0.0)) throw ConfigError("alpha: must be non-negative");
  if (!(weights.beta >= 0.0)) throw ConfigError("beta: must be non-negative");
  if (k == 0) throw ConfigError("k: must be positive");
  if (data.height == 0 || data.width == 0) throw ConfigError("data.grid: extents must be positive");
  if (data.source == SourceKind::synthetic && data.channels == 0) throw ConfigError("data.channels: must be positive");
  if (k > n()) throw ConfigError("k: exceeds the grid size " + std::to_string(n()));
  if (spectral_dropout && k < 2) throw ConfigError("k: spectral dropout needs k >= 2");
  if (eval_pairs == 0) throw ConfigError("eval_pairs: must be positive");
  if (regime == Regime::triplet && !data.triple) throw ConfigError("regime: triplet needs data.triple");
}

double lr_at(std::size_t step, const TrainConfig& config) {
  return lr_at(step, config.steps, config.warmup_steps, config.lr_peak, config.lr_final);
}

namespace {

SpectralOperatorParams initial_params(const TrainConfig& config) {
  config.validate();
  auto rng = make_rng(config.seed, kInitStream, 0);
  return SpectralOperatorParams(config.n(), config.k, config.init, rng);
}

std::vector<std::string> no_decay_names() { return {SpectralOperatorParams::kRawEigvals}; }

}  // namespace

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)),
      source_(config_.data),
      params_(initial_params(config_)),
      optimizer_(params_.parameters(), no_decay_names()) {}

Trainer::Trainer(TrainConfig config, SpectralOperatorParams params, OptimizerState state, std::size_t step)
    : config_(std::move(config)),
      source_(config_.data),
      params_(std::move(params)),
      optimizer_(std::move(state), no_decay_names()),
      step_(step) {
  config_.validate();
  if (params_.n() != config_.n() || params_.k() != config_.k) {
    throw ConfigError("checkpoint operator shape does not match the configuration");
  }
}

StepMetrics Trainer::step() {
  if (done()) throw UsageError("training already finished");
  const IdentityCodec codec;
  Tape tape;
  const RealizedOperator op = realize(tape, params_);
  const EigenvalueMask mask = eigenvalue_mask(op.eigvals, MaskMode::fuzzy);
  const Var mult = multiplicity_loss(mask);

  const std::size_t batch = config_.batch_size;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  Var equiv_sum, recon_sum;
  double commutator = 0.0, orthogonality = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint64_t example = static_cast<std::uint64_t>(step_) * batch + b;
    const ObservationTuple frames = source_.tuple(kTrainStream, example);
    std::vector<Var> obs, latents, coeffs;
    for (const auto& f : frames.frames) {
      obs.push_back(tape.constant(f.as_matrix()));
      latents.push_back(codec.encode(obs.back()));
      coeffs.push_back(project(latents.back(), op));
    }
    std::optional<DropoutDraw> draw;
    if (config_.spectral_dropout) {
      auto rng = make_rng(config_.seed, kDropoutStream, example);
      draw = sample_spectral_dropout(config_.k, rng);
    }
    const DropoutDraw* drop = draw ? &*draw : nullptr;

    const IsometricMap tau = estimate_map(coeffs[0], coeffs[1], mask);
    Var equiv, recon;
    if (config_.regime == Regime::pairwise) {
      equiv = equivariance_loss(tau, coeffs[0], coeffs[1]);
      recon = reconstruction_loss(codec, tau, latents[0], latents[1], obs[0], obs[1], op, drop);
    } else {
      const IsometricMap sigma = estimate_map(coeffs[1], coeffs[2], mask);
      const TripletLosses t = triplet_losses(codec, tau, sigma, coeffs, latents, obs, op, drop);
      equiv = t.equivariance;
      recon = t.reconstruction;
    }
    equiv_sum = b == 0 ? equiv : equiv_sum + equiv;
    recon_sum = b == 0 ? recon : recon_sum + recon;
    commutator += commutator_residual(tau.tau.value(), op.eigvals.value()) * inv_batch;
    orthogonality = std::max(orthogonality, orthogonality_residual(tau.tau.value()));
  }

  CombinedLoss loss = combined_loss(config_.weights, inv_batch * recon_sum, inv_batch * equiv_sum, mult);
  loss.report.commutator_residual = commutator;
  loss.report.orthogonality_residual = orthogonality;
  if (!std::isfinite(loss.report.total)) {
    throw NumericalError("non-finite loss at step " + std::to_string(step_));
  }

  const double lr = lr_at(step_, config_);
  params_.parameters().zero_grad();
  tape.backward(loss.total);
  optimizer_.step(params_.parameters(), lr, config_.weight_decay);
  StepMetrics metrics{step_, lr, loss.report};
  ++step_;
  return metrics;
}

void train(Trainer& trainer, const TrainHooks& hooks) {
  const std::size_t every = trainer.config().checkpoint_every;
  while (!trainer.done()) {
    const StepMetrics m = trainer.step();
    if (hooks.on_step) hooks.on_step(m);
    if (hooks.on_checkpoint && every > 0 && trainer.current_step() % every == 0 && !trainer.done()) {
      hooks.on_checkpoint(trainer);
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(trainer);
}

double equivariance_error_percent(std::span<const Tensor> taus, std::span<const Tensor> coeffs_a,
                                  std::span<const Tensor> coeffs_b) {
  if (taus.empty()) throw UsageError("equivariance error over an empty set");
  if (taus.size() != coeffs_a.size() || taus.size() != coeffs_b.size()) {
    throw DimensionError("equivariance error: mismatched list lengths");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const Tensor mapped = matmul_plain(taus[i], coeffs_a[i]);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < mapped.size(); ++j) {
      const double r = mapped[j] - coeffs_b[i][j];
      num += r * r;
      den += coeffs_b[i][j] * coeffs_b[i][j];
    }
    acc += den > 0.0 ? num / den : 0.0;
  }
  return 100.0 * acc / static_cast<double>(taus.size());
}

EvalReport evaluate(const OperatorSnapshot& op, std::span<const ObservationTuple> pairs, double distinct_tol,
                    double block_tol) {
  if (pairs.empty()) throw UsageError("evaluation needs at least one held-out pair");
  std::vector<Tensor> taus, ca, cb;
  const auto blocks = eigenvalue_blocks(op.eigvals, block_tol);
  EvalReport report;
  report.pairs = pairs.size();
  report.distinct_eigenvalues = eigenvalue_blocks(op.eigvals, distinct_tol).size();
  report.distinct_tolerance = distinct_tol;
  report.block_tolerance = block_tol;
  for (const auto& t : pairs) {
    if (t.frames.size() < 2) throw UsageError("evaluation tuple needs at least two frames");
    Tape tape;
    const Var eig = tape.constant(op.eigvals);
    const Var a = tape.constant(project(t.frames[0].as_matrix(), op));
    const Var b = tape.constant(project(t.frames[1].as_matrix(), op));
    const IsometricMap map = estimate_map(a, b, eigenvalue_mask(eig, MaskMode::fuzzy));
    const Tensor& tau = map.tau.value();
    report.commutator_residual += commutator_residual(tau, op.eigvals);
    report.orthogonality_residual = std::max(report.orthogonality_residual, orthogonality_residual(tau));
    report.off_diagonal_fraction += off_diagonal_fraction(tau);
    report.off_block_fraction += off_block_fraction(tau, blocks);
    taus.push_back(tau);
    ca.push_back(a.value());
    cb.push_back(b.value());
  }
  const double count = static_cast<double>(pairs.size());
  report.commutator_residual /= count;
  report.off_diagonal_fraction /= count;
  report.off_block_fraction /= count;
  report.equivariance_error_pct = equivariance_error_percent(taus, ca, cb);
  return report;
}

double evaluate_equivariance(const OperatorSnapshot& op, std::span<const ObservationTuple> pairs) {
  return evaluate(op, pairs, 1e-2, 1e-2).equivariance_error_pct;
}

std::vector<ObservationTuple> held_out_pairs(const PairSource& source, std::size_t count) {
  std::vector<ObservationTuple> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(source.tuple(kEvalStream, i));
  return out;
}

}  // namespace niso
