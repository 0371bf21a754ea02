#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "niso/tensor.hpp"

namespace niso {

/// Linear warmup from 0 to `peak` over `warmup` steps, then cosine decay to
/// `final_lr` at progress (step − warmup)/(steps − warmup) = 1.
/// Throws UsageError unless 0 ≤ step < steps.
double lr_at(std::size_t step, std::size_t steps, std::size_t warmup, double peak, double final_lr);

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, in parameter-set order.
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// Adam with decoupled weight decay. Parameters listed in `no_decay` skip the
/// decay term.
class AdamW {
 public:
  AdamW(const ParameterSet& params, std::vector<std::string> no_decay = {}, AdamWHyper hyper = {});
  AdamW(OptimizerState state, std::vector<std::string> no_decay = {}, AdamWHyper hyper = {});

  /// p ← p(1 − lr·wd), then the bias-corrected adaptive step. Throws
  /// NumericalError naming the parameter if a gradient is not finite.
  void step(ParameterSet& params, double lr, double weight_decay);

  const OptimizerState& state() const noexcept { return state_; }

 private:
  bool decays(const std::string& name) const;

  OptimizerState state_;
  std::vector<std::string> no_decay_;
  AdamWHyper hyper_;
};

}  // namespace niso
