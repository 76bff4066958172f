#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "derain/datagen.hpp"
#include "derain/smrnet.hpp"

namespace derain {

struct OptimizerConfig {
  enum class Kind { adam, sgd };
  Kind kind = Kind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainOptions {
  int epochs = 30;
  int batch_size = 1;  // scenes per optimizer step; gradients are averaged
  OptimizerConfig optimizer;
  std::vector<double> stage_weights;  // empty = all ones
  std::uint64_t shuffle_seed = 1;
  std::filesystem::path checkpoint_dir;  // per-epoch + final checkpoints when set
  std::filesystem::path log_csv;         // epoch log when set
  bool verbose = false;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double holdout_psnr = 0.0;  // 0 when no holdout corpus is given
  double holdout_ssim = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
};

/// Trains in place. The veiled loss is used iff the config has a veil
/// head; the atmospheric light is taken from each scene's ground truth
/// during training, while holdout scoring runs the inference-time
/// brightest-pixel rule. Scene order per epoch is a seeded shuffle and
/// gradient accumulation order is fixed, so runs are reproducible.
/// The epoch log CSV columns are:
///   epoch,train_loss,holdout_psnr,holdout_ssim,wall_seconds
TrainResult train(NetworkParams& params, const NetworkConfig& config,
                  const DatasetManifest& train_manifest, const DatasetManifest* holdout_manifest,
                  const TrainOptions& options);

/// Mean PSNR/SSIM of derained scenes against clean ground truth, plus the
/// mean absolute reciprocal-transmittance error when the network has a
/// veil head (0 otherwise). Restores with the brightest-pixel rule.
struct CorpusEval {
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_inv_alpha_err = 0.0;
};
CorpusEval evaluate_derained(const NetworkParams& params, const NetworkConfig& config,
                             const DatasetManifest& manifest);

}  // namespace derain
