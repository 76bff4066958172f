#pragma once

#include <optional>
#include <string>
#include <vector>

#include "derain/tensor.hpp"

namespace derain {

/// Size class of a streak, by occupied pixel area on the image.
/// Ranges are half-open intervals (lo, hi].
struct StreakBin {
  enum class Label { small, middle, large };
  Label label = Label::small;
  double area_lo = 0.0;  // exclusive
  double area_hi = 0.0;  // inclusive

  bool contains(double area) const { return area > area_lo && area <= area_hi; }
  const char* name() const;
};

/// The three standard bins: (0,60], (60,300], (300,600] pixels.
const std::vector<StreakBin>& standard_bins();

/// Ground-truth bundle of one rendered scene. All image tensors are
/// (C,H,W); transmittance and depth are single channel.
struct RainScene {
  Tensor background;                  // B, 3xHxW in [0,1]
  std::vector<Tensor> streak_layers;  // R_i >= 0, one per scale bin
  Tensor transmittance;               // alpha, 1xHxW in [kEpsRecip, 1]
  Tensor atmospheric_light;           // A, scalar {1} or 1xHxW, in [0,1]
  Tensor observed;                    // O, 3xHxW in [0,1]
  Tensor depth;                       // optional, 1xHxW, >= 0
  double attenuation_beta = 0.0;

  bool has_depth() const { return depth.valid(); }
  int height() const { return background.dim(1); }
  int width() const { return background.dim(2); }
};

/// Additive streak composite: B + sum(R_i), clamped to [0,1]. The clamp
/// models 8-bit saturation; use the unclamped variant for algebra tests.
Tensor compose_linear(const Tensor& background, const std::vector<Tensor>& streaks);
Tensor compose_linear_unclamped(const Tensor& background, const std::vector<Tensor>& streaks);

/// Veiled composite: alpha .* (B + sum R_i) + (1 - alpha) .* A, clamped to
/// [0,1]. alpha must lie in [kEpsRecip, 1]; alpha and A broadcast over the
/// color channels. The unclamped variant preserves graph history.
Tensor compose_veiled(const Tensor& background, const std::vector<Tensor>& streaks,
                      const Tensor& alpha, const Tensor& atmospheric);
Tensor compose_veiled_unclamped(const Tensor& background, const std::vector<Tensor>& streaks,
                                const Tensor& alpha, const Tensor& atmospheric);

/// Free-space attenuation: alpha = exp(-beta * depth), floored at
/// kEpsRecip so the reciprocal always exists. depth and beta must be >= 0.
Tensor transmittance_from_depth(const Tensor& depth, double beta);

/// Exact inversion of the veiled composite given its ingredients:
/// B = inv_alpha .* (O - A) - sum(R_i) + A. inv_alpha must be >= 1
/// everywhere. The unclamped variant is differentiable and is what the
/// network's recovery path uses; the clamped one produces a displayable
/// image.
Tensor invert_background(const Tensor& observed, const Tensor& inv_alpha,
                         const std::vector<Tensor>& streaks, const Tensor& atmospheric);
Tensor invert_background_unclamped(const Tensor& observed, const Tensor& inv_alpha,
                                   const std::vector<Tensor>& streaks, const Tensor& atmospheric);

/// Brightest-pixel estimate of the atmospheric light: the maximum over
/// pixels of the channel-mean intensity.
double estimate_atmospheric_light(const Tensor& observed);

/// Clamps every element to [0,1]. Drops graph history.
Tensor clamp01(const Tensor& t);

/// Checks the scene's declared invariants; returns human-readable
/// violations (empty when the scene is consistent). `tol` absorbs the
/// composite clamp and file round-trips.
std::vector<std::string> verify_scene(const RainScene& scene, double tol = 1e-9);

}  // namespace derain
