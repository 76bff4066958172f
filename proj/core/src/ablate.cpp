#include "derain/ablate.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace derain {

AblationResult run_ablation(const DatasetManifest& train_manifest,
                            const DatasetManifest& holdout_manifest,
                            const AblationOptions& options) {
  if (options.module_counts.empty()) {
    throw std::invalid_argument("run_ablation: no module counts requested");
  }
  AblationResult result;
  for (int modules : options.module_counts) {
    NetworkConfig config = options.base;
    config.scale_bins = modules;
    if (modules == 0) config.veil_enabled = false;
    validate_config(config);

    NetworkParams params = build_network(config);
    result.parameter_counts.emplace_back(modules, params.element_count());

    TrainOptions train_options = options.train;
    train_options.checkpoint_dir.clear();
    train_options.log_csv.clear();
    const TrainResult trained =
        train(params, config, train_manifest, &holdout_manifest, train_options);
    for (const auto& e : trained.epochs) {
      result.rows.push_back({modules, e.epoch, e.train_loss, e.holdout_psnr});
    }
  }
  return result;
}

void write_ablation_csv(const AblationResult& result, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("write_ablation_csv: cannot open for writing: " + file.string());
  }
  out << "modules,epoch,train_loss,holdout_psnr\n";
  char line[128];
  for (const auto& row : result.rows) {
    std::snprintf(line, sizeof(line), "%d,%d,%.6f,%.6f\n", row.modules, row.epoch, row.train_loss,
                  row.holdout_psnr);
    out << line;
  }
  if (!out) throw std::runtime_error("write_ablation_csv: write failed: " + file.string());
}

}  // namespace derain
