#include "derain/rain_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "derain/constants.hpp"

namespace derain {

const char* StreakBin::name() const {
  switch (label) {
    case Label::small: return "small";
    case Label::middle: return "middle";
    default: return "large";
  }
}

const std::vector<StreakBin>& standard_bins() {
  static const std::vector<StreakBin> bins = {
      {StreakBin::Label::small, 0.0, 60.0},
      {StreakBin::Label::middle, 60.0, 300.0},
      {StreakBin::Label::large, 300.0, 600.0},
  };
  return bins;
}

namespace {

Tensor sum_layers(const Tensor& base, const std::vector<Tensor>& streaks) {
  Tensor acc = base;
  for (const auto& r : streaks) acc = add(acc, r);
  return acc;
}

void require_alpha_range(const Tensor& alpha) {
  for (double v : alpha.data()) {
    if (v < kEpsRecip || v > 1.0) {
      throw std::domain_error("compose_veiled: transmittance outside [" +
                              std::to_string(kEpsRecip) + ", 1]");
    }
  }
}

}  // namespace

Tensor clamp01(const Tensor& t) {
  std::vector<double> out(t.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(t.data()[i], 0.0, 1.0);
  return Tensor::from_data(t.shape(), std::move(out));
}

Tensor compose_linear_unclamped(const Tensor& background, const std::vector<Tensor>& streaks) {
  return sum_layers(background, streaks);
}

Tensor compose_linear(const Tensor& background, const std::vector<Tensor>& streaks) {
  return clamp01(compose_linear_unclamped(background, streaks));
}

Tensor compose_veiled_unclamped(const Tensor& background, const std::vector<Tensor>& streaks,
                                const Tensor& alpha, const Tensor& atmospheric) {
  require_alpha_range(alpha);
  const Tensor lit = sum_layers(background, streaks);
  const Tensor veil = mul(sub(1.0, alpha), atmospheric);
  return add(mul(alpha, lit), veil);
}

Tensor compose_veiled(const Tensor& background, const std::vector<Tensor>& streaks,
                      const Tensor& alpha, const Tensor& atmospheric) {
  return clamp01(compose_veiled_unclamped(background, streaks, alpha, atmospheric));
}

Tensor transmittance_from_depth(const Tensor& depth, double beta) {
  if (beta < 0.0) throw std::domain_error("transmittance_from_depth: beta must be >= 0");
  std::vector<double> out(depth.data().size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double d = depth.data()[i];
    if (d < 0.0) throw std::domain_error("transmittance_from_depth: negative depth");
    out[i] = std::max(std::exp(-beta * d), kEpsRecip);
  }
  return Tensor::from_data(depth.shape(), std::move(out));
}

Tensor invert_background_unclamped(const Tensor& observed, const Tensor& inv_alpha,
                                   const std::vector<Tensor>& streaks,
                                   const Tensor& atmospheric) {
  for (double v : inv_alpha.data()) {
    if (v < 1.0) {
      throw std::domain_error("invert_background: reciprocal transmittance below 1");
    }
  }
  Tensor recovered = mul(inv_alpha, sub(observed, atmospheric));
  for (const auto& r : streaks) recovered = sub(recovered, r);
  return add(recovered, atmospheric);
}

Tensor invert_background(const Tensor& observed, const Tensor& inv_alpha,
                         const std::vector<Tensor>& streaks, const Tensor& atmospheric) {
  return clamp01(invert_background_unclamped(observed, inv_alpha, streaks, atmospheric));
}

double estimate_atmospheric_light(const Tensor& observed) {
  const int C = observed.dim(0), H = observed.dim(1), W = observed.dim(2);
  double best = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double mean = 0.0;
      for (int c = 0; c < C; ++c) mean += observed.at(c, y, x);
      best = std::max(best, mean / C);
    }
  }
  return best;
}

std::vector<std::string> verify_scene(const RainScene& scene, double tol) {
  std::vector<std::string> issues;
  auto in_unit_range = [](const Tensor& t) {
    for (double v : t.data()) {
      if (v < 0.0 || v > 1.0) return false;
    }
    return true;
  };

  if (!in_unit_range(scene.background)) issues.push_back("background outside [0,1]");
  if (!in_unit_range(scene.observed)) issues.push_back("observed outside [0,1]");
  if (!in_unit_range(scene.atmospheric_light)) issues.push_back("atmospheric light outside [0,1]");
  for (size_t i = 0; i < scene.streak_layers.size(); ++i) {
    for (double v : scene.streak_layers[i].data()) {
      if (v < 0.0) {
        issues.push_back("streak layer " + std::to_string(i) + " has negative values");
        break;
      }
    }
  }
  for (double v : scene.transmittance.data()) {
    if (v < kEpsRecip - 1e-15 || v > 1.0) {
      issues.push_back("transmittance outside [eps, 1]");
      break;
    }
  }

  // Composite law: O must equal the clamped veiled composite.
  const Tensor composed = compose_veiled(scene.background, scene.streak_layers,
                                         scene.transmittance, scene.atmospheric_light);
  double max_diff = 0.0;
  for (size_t i = 0; i < composed.data().size(); ++i) {
    max_diff = std::max(max_diff, std::abs(composed.data()[i] - scene.observed.data()[i]));
  }
  if (max_diff > tol) {
    issues.push_back("observed deviates from composite by " + std::to_string(max_diff));
  }

  // Attenuation law when depth is present.
  if (scene.has_depth()) {
    const Tensor expected = transmittance_from_depth(scene.depth, scene.attenuation_beta);
    double alpha_diff = 0.0;
    for (size_t i = 0; i < expected.data().size(); ++i) {
      alpha_diff = std::max(alpha_diff,
                            std::abs(expected.data()[i] - scene.transmittance.data()[i]));
    }
    if (alpha_diff > tol) {
      issues.push_back("transmittance deviates from exp(-beta*depth) by " +
                       std::to_string(alpha_diff));
    }
  }
  return issues;
}

}  // namespace derain
