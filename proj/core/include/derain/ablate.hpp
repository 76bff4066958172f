#pragma once

#include <filesystem>
#include <vector>

#include "derain/datagen.hpp"
#include "derain/trainer.hpp"

namespace derain {

/// Trains one network variant per requested module count under an
/// identical budget and seed, recording held-out PSNR per epoch. A module
/// count of 0 selects the direct background-regression baseline.
struct AblationOptions {
  std::vector<int> module_counts = {0, 3};
  NetworkConfig base;   // scale_bins is overridden per variant
  TrainOptions train;   // shared budget; checkpoints/logs are not written
};

struct AblationRow {
  int modules = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double holdout_psnr = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // one per (variant, epoch), variants in input order
  std::vector<std::pair<int, long long>> parameter_counts;  // (modules, element count)
};

AblationResult run_ablation(const DatasetManifest& train_manifest,
                            const DatasetManifest& holdout_manifest,
                            const AblationOptions& options);

/// Header "modules,epoch,train_loss,holdout_psnr", 6-decimal fixed point;
/// byte-identical across reruns with the same seeds.
void write_ablation_csv(const AblationResult& result, const std::filesystem::path& file);

}  // namespace derain
