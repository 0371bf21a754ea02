#include "niso/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "niso/error.hpp"

namespace niso {

double lr_at(std::size_t step, std::size_t steps, std::size_t warmup, double peak, double final_lr) {
  if (step >= steps) {
    throw UsageError("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(steps) + ")");
  }
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(steps - warmup);
  return final_lr + 0.5 * (peak - final_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(const ParameterSet& params, std::vector<std::string> no_decay, AdamWHyper hyper)
    : no_decay_(std::move(no_decay)), hyper_(hyper) {
  for (const auto& p : params) {
    state_.names.push_back(p.name);
    state_.first_moment.emplace_back(p.tensor.size(), 0.0);
    state_.second_moment.emplace_back(p.tensor.size(), 0.0);
  }
}

AdamW::AdamW(OptimizerState state, std::vector<std::string> no_decay, AdamWHyper hyper)
    : state_(std::move(state)), no_decay_(std::move(no_decay)), hyper_(hyper) {}

bool AdamW::decays(const std::string& name) const {
  return std::find(no_decay_.begin(), no_decay_.end(), name) == no_decay_.end();
}

void AdamW::step(ParameterSet& params, double lr, double weight_decay) {
  if (params.size() != state_.names.size()) throw DimensionError("optimizer state does not match parameter set");
  std::size_t idx = 0;
  for (auto& p : params) {
    if (p.name != state_.names[idx]) {
      throw DimensionError("optimizer state for '" + state_.names[idx] + "' applied to '" + p.name + "'");
    }
    if (state_.first_moment[idx].size() != p.tensor.size()) {
      throw DimensionError("optimizer buffers for '" + p.name + "' have the wrong size");
    }
    if (p.tensor.has_grad()) {
      for (double g : p.tensor.grad) {
        if (!std::isfinite(g)) throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
      }
    }
    ++idx;
  }

  const std::uint64_t t = ++state_.step;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t));
  idx = 0;
  for (auto& p : params) {
    auto& m = state_.first_moment[idx];
    auto& v = state_.second_moment[idx];
    ++idx;
    auto data = p.tensor.data();
    const double decay = decays(p.name) ? lr * weight_decay : 0.0;
    const bool has_grad = p.tensor.has_grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] -= decay * data[i];
      const double g = has_grad ? p.tensor.grad[i] : 0.0;
      m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * g;
      v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * g * g;
      data[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + hyper_.eps);
    }
  }
}

}  // namespace niso
