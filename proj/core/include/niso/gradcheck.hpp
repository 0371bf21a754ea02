#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace niso {

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Negative control: scale the backward rule of this op (see Tape::inject_fault).
  std::string fault_op;
  double fault_factor = 1.5;
};

/// Central finite-difference check of every differentiable primitive plus the
/// composite pairwise and triplet losses. The error of one case is
/// ||g_analytic − g_fd||₂ / max(||g_analytic||₂, ||g_fd||₂, 1e-12) over all
/// inputs.
std::vector<GradcheckEntry> run_gradcheck(const GradcheckOptions& options = {});

/// Names of the checked cases, in report order.
std::vector<std::string> gradcheck_case_names();

}  // namespace niso
