#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "niso/data_gen.hpp"
#include "niso/isometry_solver.hpp"
#include "niso/losses.hpp"
#include "niso/optimizer.hpp"
#include "niso/spectral_operator.hpp"

namespace niso {

enum class Regime { pairwise, triplet };

/// RNG stream ids passed to make_rng / PairSource::tuple.
inline constexpr std::uint64_t kTrainStream = 0;
inline constexpr std::uint64_t kEvalStream = 1;
inline constexpr std::uint64_t kDropoutStream = 2;
inline constexpr std::uint64_t kInitStream = 3;

struct TrainConfig {
  std::size_t steps = 20000;
  std::size_t batch_size = 1;
  double lr_peak = 5e-4;
  double lr_final = 5e-5;
  std::size_t warmup_steps = 2000;
  double weight_decay = 1e-4;
  LossWeights weights{0.0, 0.1};
  Regime regime = Regime::pairwise;
  bool spectral_dropout = true;
  std::uint64_t seed = 0;
  std::size_t k = 32;
  PairSpec data;
  OperatorInit init;
  /// 0 disables periodic checkpoints (the final one is always written).
  std::size_t checkpoint_every = 0;
  std::size_t eval_pairs = 64;
  /// Tolerance used when counting distinct eigenvalues in reports.
  double distinct_tolerance = 1e-2;
  /// Eigenvalue gap below which indices share a block for off-block fractions:
  /// ln 2, where the fuzzy mask weight exp(−|Δλ|) falls to one half.
  double block_tolerance = 0.6931471805599453;

  std::size_t n() const { return data.height * data.width; }
  std::size_t d() const { return data.channels; }
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

double lr_at(std::size_t step, const TrainConfig& config);

struct StepMetrics {
  std::size_t step = 0;
  double lr = 0.0;
  LossReport report;
};

/// Owns the operator parameters, optimizer state and data source of one run.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);
  /// Resumes from saved parameters/optimizer state at `step` completed steps.
  Trainer(TrainConfig config, SpectralOperatorParams params, OptimizerState state, std::size_t step);

  /// One optimization step. Throws NumericalError on a non-finite loss, in
  /// which case parameters are left untouched.
  StepMetrics step();
  bool done() const noexcept { return step_ >= config_.steps; }

  std::size_t current_step() const noexcept { return step_; }
  const TrainConfig& config() const noexcept { return config_; }
  const SpectralOperatorParams& params() const noexcept { return params_; }
  SpectralOperatorParams& params() noexcept { return params_; }
  const OptimizerState& optimizer_state() const noexcept { return optimizer_.state(); }
  const PairSource& source() const noexcept { return source_; }

 private:
  TrainConfig config_;
  PairSource source_;
  SpectralOperatorParams params_;
  AdamW optimizer_;
  std::size_t step_ = 0;
};

struct TrainHooks {
  std::function<void(const StepMetrics&)> on_step;
  /// Called every checkpoint_every steps and once at the end.
  std::function<void(const Trainer&)> on_checkpoint;
};

void train(Trainer& trainer, const TrainHooks& hooks = {});

/// Held-out diagnostics of a (trained) operator.
struct EvalReport {
  double equivariance_error_pct = 0.0;
  double commutator_residual = 0.0;
  double orthogonality_residual = 0.0;
  std::size_t distinct_eigenvalues = 0;
  double off_diagonal_fraction = 0.0;
  double off_block_fraction = 0.0;
  std::size_t pairs = 0;
  double distinct_tolerance = 0.0;
  double block_tolerance = 0.0;
};

/// Mean over pairs of ||τ_Ω cA − cB||²/||cB||², in percent.
double equivariance_error_percent(std::span<const Tensor> taus, std::span<const Tensor> coeffs_a,
                                  std::span<const Tensor> coeffs_b);

/// Identity-codec evaluation on (ψ, Tψ) tuples with the fuzzy-mask solve.
/// Throws UsageError on an empty set.
EvalReport evaluate(const OperatorSnapshot& op, std::span<const ObservationTuple> pairs, double distinct_tol,
                    double block_tol);
double evaluate_equivariance(const OperatorSnapshot& op, std::span<const ObservationTuple> pairs);

/// The held-out tuples used by evaluation: stream kEvalStream, indices [0, count).
std::vector<ObservationTuple> held_out_pairs(const PairSource& source, std::size_t count);

}  // namespace niso
