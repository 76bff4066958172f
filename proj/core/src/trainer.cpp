#include "derain/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "derain/metrics.hpp"
#include "derain/rng.hpp"

namespace derain {
namespace {

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const std::vector<Tensor>& params)
      : config_(config), params_(params) {
    if (config.kind == OptimizerConfig::Kind::adam) {
      first_.resize(params.size());
      second_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        first_[i].assign(params[i].data().size(), 0.0);
        second_[i].assign(params[i].data().size(), 0.0);
      }
    }
  }

  void step() {
    ++steps_;
    const double lr = config_.learning_rate;
    if (config_.kind == OptimizerConfig::Kind::sgd) {
      for (auto& p : params_) {
        if (!p.has_grad()) continue;
        auto& values = p.raw_data();
        const auto& g = p.grad();
        for (size_t i = 0; i < values.size(); ++i) values[i] -= lr * g[i];
      }
      return;
    }
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double bias1 = 1.0 - std::pow(b1, steps_);
    const double bias2 = 1.0 - std::pow(b2, steps_);
    for (size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (!p.has_grad()) continue;
      auto& values = p.raw_data();
      const auto& g = p.grad();
      auto& m = first_[k];
      auto& v = second_[k];
      for (size_t i = 0; i < values.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        values[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
      }
    }
  }

 private:
  OptimizerConfig config_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  int steps_ = 0;
};

Tensor scene_loss(const ForwardTrace& trace, const RainScene& scene, const NetworkConfig& config,
                  const std::vector<double>& stage_weights) {
  return config.veil_enabled ? loss_smrnet_veil(trace, scene, stage_weights)
                             : loss_smrnet(trace, scene, stage_weights);
}

}  // namespace

CorpusEval evaluate_derained(const NetworkParams& params, const NetworkConfig& config,
                             const DatasetManifest& manifest) {
  CorpusEval eval;
  if (manifest.entries.empty()) return eval;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const RainScene scene = load_scene(manifest, i);
    const DerainResult result = derain(params, config, scene.observed);
    eval.mean_psnr += psnr(result.restored, scene.background);
    eval.mean_ssim += ssim(result.restored, scene.background);
    if (config.veil_enabled) {
      const auto& inv = result.trace.inv_alpha.data();
      const auto& alpha = scene.transmittance.data();
      double acc = 0.0;
      for (size_t e = 0; e < inv.size(); ++e) acc += std::abs(inv[e] - 1.0 / alpha[e]);
      eval.mean_inv_alpha_err += acc / static_cast<double>(inv.size());
    }
  }
  const double n = static_cast<double>(manifest.entries.size());
  eval.mean_psnr /= n;
  eval.mean_ssim /= n;
  eval.mean_inv_alpha_err /= n;
  return eval;
}

TrainResult train(NetworkParams& params, const NetworkConfig& config,
                  const DatasetManifest& train_manifest, const DatasetManifest* holdout_manifest,
                  const TrainOptions& options) {
  validate_config(config);
  if (train_manifest.entries.empty()) {
    throw std::invalid_argument("train: empty training manifest");
  }
  if (config.scale_bins > 0 &&
      static_cast<int>(train_manifest.spec.bins.size()) != config.scale_bins) {
    throw std::invalid_argument("train: manifest has " +
                                std::to_string(train_manifest.spec.bins.size()) +
                                " streak bins but the network expects " +
                                std::to_string(config.scale_bins));
  }
  if (options.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (options.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

  if (!options.checkpoint_dir.empty()) {
    std::filesystem::create_directories(options.checkpoint_dir);
  }
  std::ofstream log;
  if (!options.log_csv.empty()) {
    log.open(options.log_csv, std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("train: cannot open log: " + options.log_csv.string());
    log << "epoch,train_loss,holdout_psnr,holdout_ssim,wall_seconds\n";
  }

  std::vector<RainScene> scenes;
  scenes.reserve(train_manifest.entries.size());
  for (size_t i = 0; i < train_manifest.entries.size(); ++i) {
    scenes.push_back(load_scene(train_manifest, i));
  }

  std::vector<Tensor> tensors = params.tensors();
  Optimizer optimizer(options.optimizer, tensors);

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::vector<size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(split_seed(options.shuffle_seed, 0x50000u + static_cast<std::uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double loss_total = 0.0;
    size_t in_batch = 0;
    for (auto& t : tensors) t.zero_grad();
    for (size_t n = 0; n < order.size(); ++n) {
      const RainScene& scene = scenes[order[n]];
      std::optional<double> atmospheric;
      if (config.veil_enabled) atmospheric = scene.atmospheric_light.value();
      const ForwardTrace trace = forward(params, config, scene.observed, atmospheric);
      const Tensor loss = scene_loss(trace, scene, config, options.stage_weights);
      backward(loss);
      loss_total += loss.value();
      ++in_batch;

      const bool flush = in_batch == static_cast<size_t>(options.batch_size) ||
                         n + 1 == order.size();
      if (flush) {
        if (in_batch > 1) {
          const double inv = 1.0 / static_cast<double>(in_batch);
          for (auto& t : tensors) {
            if (!t.has_grad()) continue;
            for (auto& g : t.node()->grad) g *= inv;
          }
        }
        optimizer.step();
        for (auto& t : tensors) t.zero_grad();
        in_batch = 0;
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_total / static_cast<double>(scenes.size());
    if (holdout_manifest != nullptr && !holdout_manifest->entries.empty()) {
      const CorpusEval eval = evaluate_derained(params, config, *holdout_manifest);
      record.holdout_psnr = eval.mean_psnr;
      record.holdout_ssim = eval.mean_ssim;
    }
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(record);

    if (!options.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.smrc", epoch);
      save_checkpoint(options.checkpoint_dir / name, params, config);
      save_checkpoint(options.checkpoint_dir / "final.smrc", params, config);
    }
    if (log.is_open()) {
      char line[160];
      std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.3f\n", record.epoch,
                    record.train_loss, record.holdout_psnr, record.holdout_ssim,
                    record.wall_seconds);
      log << line << std::flush;
    }
    if (options.verbose) {
      std::printf("epoch %3d  loss %.6f  holdout psnr %.3f dB  ssim %.4f  (%.1fs)\n",
                  record.epoch, record.train_loss, record.holdout_psnr, record.holdout_ssim,
                  record.wall_seconds);
      std::fflush(stdout);
    }
  }
  return result;
}

}  // namespace derain
