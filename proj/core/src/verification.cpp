#include "derain/verification.hpp"

#include <chrono>
#include <cmath>

#include "derain/rain_model.hpp"
#include "derain/rng.hpp"
#include "derain/smrnet.hpp"

namespace derain {
namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (auto& v : data) v = rng.uniform(lo, hi);
  return Tensor::from_data(shape, std::move(data));
}

// Values bounded away from zero, for relu kinks and reciprocal domains.
Tensor random_tensor_away_from_zero(const Shape& shape, Rng& rng, double margin) {
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (auto& v : data) {
    const double magnitude = rng.uniform(margin, 1.0);
    v = rng.uniform01() < 0.5 ? -magnitude : magnitude;
  }
  return Tensor::from_data(shape, std::move(data));
}

// A synthetic veiled 8x8 scene; streak areas play no role here, so the
// layers are plain random nonnegative maps.
RainScene random_scene(Rng& rng, int layers) {
  RainScene scene;
  const int H = 8, W = 8;
  scene.background = random_tensor({3, H, W}, rng, 0.0, 1.0);
  for (int i = 0; i < layers; ++i) {
    scene.streak_layers.push_back(random_tensor({3, H, W}, rng, 0.0, 0.3));
  }
  scene.transmittance = random_tensor({1, H, W}, rng, 0.3, 1.0);
  scene.atmospheric_light = Tensor::scalar(rng.uniform(0.7, 1.0));
  scene.observed = compose_veiled(scene.background, scene.streak_layers, scene.transmittance,
                                  scene.atmospheric_light);
  return scene;
}

}  // namespace

GradientSuiteResult run_gradient_suite(int seeds, int network_samples_per_tensor) {
  const auto t0 = std::chrono::steady_clock::now();
  GradientSuiteResult result;
  GradCheckOptions options;  // step 1e-3, tol 1e-4

  auto run = [&](const std::string& name, const std::function<Tensor(const std::vector<Tensor>&)>& f,
                 std::vector<Tensor> inputs, const GradCheckOptions& opt) {
    SuiteCheck check{name, grad_check(f, std::move(inputs), opt)};
    result.max_rel_err = std::max(result.max_rel_err, check.report.max_rel_err);
    result.checks.push_back(std::move(check));
  };

  for (int s = 1; s <= seeds; ++s) {
    Rng rng(split_seed(0xC4ECull, static_cast<std::uint64_t>(s)));
    const std::string tag = "[seed " + std::to_string(s) + "] ";

    run(tag + "add",
        [](const std::vector<Tensor>& in) { return reduce_sum(add(in[0], in[1])); },
        {random_tensor({2, 4, 3}, rng), random_tensor({2, 4, 3}, rng)}, options);
    run(tag + "sub.scalar_broadcast",
        [](const std::vector<Tensor>& in) { return reduce_sum(sub(in[0], in[1])); },
        {random_tensor({3, 4, 4}, rng), random_tensor({1}, rng)}, options);
    run(tag + "mul",
        [](const std::vector<Tensor>& in) { return reduce_sum(mul(in[0], in[1])); },
        {random_tensor({2, 5, 5}, rng), random_tensor({2, 5, 5}, rng)}, options);
    run(tag + "mul.channel_broadcast",
        [](const std::vector<Tensor>& in) { return reduce_sum(mul(in[0], in[1])); },
        {random_tensor({3, 4, 4}, rng), random_tensor({1, 4, 4}, rng)}, options);
    run(tag + "reciprocal",
        [](const std::vector<Tensor>& in) { return reduce_sum(reciprocal(in[0])); },
        {random_tensor_away_from_zero({2, 4, 4}, rng, 0.4)}, options);
    run(tag + "relu",
        [](const std::vector<Tensor>& in) { return reduce_sum(relu(in[0])); },
        {random_tensor({3, 5, 5}, rng)}, options);
    run(tag + "concat_channels",
        [](const std::vector<Tensor>& in) {
          return reduce_sum(mul(concat_channels({in[0], in[1]}), concat_channels({in[1], in[0]})));
        },
        {random_tensor({2, 3, 3}, rng), random_tensor({2, 3, 3}, rng)}, options);
    run(tag + "reduce_mse",
        [](const std::vector<Tensor>& in) { return reduce_mse(in[0], in[1]); },
        {random_tensor({2, 4, 4}, rng), random_tensor({2, 4, 4}, rng)}, options);
    {
      Tensor target = random_tensor({3, 4, 4}, rng);
      run(tag + "conv2d",
          [target](const std::vector<Tensor>& in) {
            return reduce_mse(conv2d(in[0], in[1], in[2], 1, 1), target);
          },
          {random_tensor({2, 4, 4}, rng), random_tensor({3, 2, 3, 3}, rng),
           random_tensor({3}, rng)},
          options);
    }
    {
      Tensor target = random_tensor({2, 3, 3}, rng);
      run(tag + "conv2d.stride2",
          [target](const std::vector<Tensor>& in) {
            return reduce_mse(conv2d(in[0], in[1], in[2], 2, 1), target);
          },
          {random_tensor({3, 5, 6}, rng), random_tensor({2, 3, 3, 3}, rng),
           random_tensor({2}, rng)},
          options);
    }
    {
      Tensor target = random_tensor({2, 6, 6}, rng);
      run(tag + "conv2d.stacked",
          [target](const std::vector<Tensor>& in) {
            const Tensor h = relu(conv2d(in[0], in[1], in[2], 1, 1));
            return reduce_mse(conv2d(h, in[3], in[4], 1, 1), target);
          },
          {random_tensor({2, 6, 6}, rng), random_tensor({4, 2, 3, 3}, rng),
           random_tensor({4}, rng), random_tensor({2, 4, 3, 3}, rng), random_tensor({2}, rng)},
          options);
    }

    // The complete veiled network loss on an 8x8 scene, probing a
    // deterministic sample of each parameter tensor. A scene draw can
    // park a relu pre-activation so close to zero that finite
    // differences are unusable around much of the parameter space; such
    // draws are detected by their skip rate and redrawn.
    {
      NetworkConfig config;
      config.scale_bins = 3;
      config.recurrent_iters = 2;
      config.stages = 2;
      config.features = 6;
      config.dense_layers = 2;
      config.growth = 4;
      config.veil_enabled = true;
      config.seed = static_cast<std::uint64_t>(s);
      const NetworkParams params = build_network(config);
      const std::vector<std::string> keys = params.keys();

      SuiteCheck check;
      for (int attempt = 0; attempt < 8; ++attempt) {
        const RainScene scene = random_scene(rng, config.scale_bins);
        const double atmospheric = scene.atmospheric_light.value();
        auto f = [config, keys, scene, atmospheric](const std::vector<Tensor>& in) {
          NetworkParams probe;
          for (size_t i = 0; i < keys.size(); ++i) probe.add(keys[i], in[i]);
          const ForwardTrace trace = forward(probe, config, scene.observed, atmospheric);
          return loss_smrnet_veil(trace, scene);
        };
        GradCheckOptions net_options = options;
        net_options.max_elements_per_input = network_samples_per_tensor;
        net_options.sample_seed = static_cast<std::uint64_t>(s);
        check = {tag + "smrnet_veil.loss", grad_check(f, params.tensors(), net_options)};
        if (check.report.skipped_nondifferentiable * 20 <= check.report.checked_elements) break;
      }
      result.max_rel_err = std::max(result.max_rel_err, check.report.max_rel_err);
      result.checks.push_back(std::move(check));
    }
  }

  result.passed = true;
  long long checked = 0, skipped = 0;
  for (const auto& c : result.checks) {
    result.passed = result.passed && c.report.passed;
    checked += c.report.checked_elements;
    skipped += c.report.skipped_nondifferentiable;
  }
  // Kink skips must stay rare, or the battery loses its teeth.
  if (checked > 0 && skipped * 20 > checked) result.passed = false;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace derain
