#pragma once

#include <string>
#include <vector>

#include "derain/gradcheck.hpp"

namespace derain {

struct SuiteCheck {
  std::string name;
  GradCheckReport report;
};

struct GradientSuiteResult {
  std::vector<SuiteCheck> checks;
  bool passed = false;
  double max_rel_err = 0.0;
  double wall_seconds = 0.0;
};

/// The default gradient verification battery: exhaustive checks of every
/// differentiable op on small random tensors, plus the full veiled
/// network loss on an 8x8 scene with a deterministic sample of parameter
/// elements. Central differences, step 1e-3, tolerance 1e-4, repeated
/// over `seeds` seeds.
GradientSuiteResult run_gradient_suite(int seeds = 5, int network_samples_per_tensor = 24);

}  // namespace derain
