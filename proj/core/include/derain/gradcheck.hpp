#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "derain/tensor.hpp"

namespace derain {

struct GradCheckIssue {
  int input_index = 0;
  int element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;  // over differentiable probe points
  int checked_elements = 0;
  int skipped_nondifferentiable = 0;
  double tolerance = 0.0;
  bool passed = false;
  std::vector<GradCheckIssue> failures;  // every element exceeding tolerance

  std::string summary() const;
};

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Error is |analytic - numeric| / max(|analytic|, |numeric|, denom_floor),
  /// so near-zero gradients are compared absolutely at denom_floor scale.
  double denom_floor = 1e-2;
  /// Cap on probed elements per input (0 = exhaustive). Sampling is a
  /// deterministic function of sample_seed.
  int max_elements_per_input = 0;
  std::uint64_t sample_seed = 0;
};

/// Compares reverse-mode gradients of the one-element output of `f`
/// against central finite differences over the given leaf inputs.
/// `f` must be a pure function of the inputs' values.
///
/// Central differences only estimate a derivative where f is C1 inside
/// the probe window; a relu kink crossing the window makes the estimate
/// off by half the slope jump. A probe that exceeds tolerance is
/// therefore re-examined through its one-sided slopes: when the slope
/// discontinuity |s+ - s-| is at least the observed disagreement, the
/// point is non-differentiable and counted in skipped_nondifferentiable
/// instead of failing the check. A wrong backward cannot hide there: it
/// disagrees on smooth probes, where the slopes match and the rule never
/// fires (see the corrupted-backward regression test).
GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           std::vector<Tensor> inputs, const GradCheckOptions& options = {});

}  // namespace derain
