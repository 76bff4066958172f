// derain: synthetic-rain laboratory CLI.
//
// Subcommands: render (synthesize a corpus), train, derain (restore an
// image or a whole corpus), evaluate (PSNR/SSIM report), gradcheck
// (gradient verification suite), ablate (module-count comparison).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "derain/ablate.hpp"
#include "derain/datagen.hpp"
#include "derain/image_io.hpp"
#include "derain/metrics.hpp"
#include "derain/run_config.hpp"
#include "derain/smrnet.hpp"
#include "derain/trainer.hpp"
#include "derain/verification.hpp"

namespace {

namespace fs = std::filesystem;
using namespace derain;

RunConfig load_config_or_default(const std::string& config_path) {
  return config_path.empty() ? default_run_config() : load_run_config(config_path);
}

// Accepts a manifest file or the directory containing manifest.txt.
DatasetManifest resolve_manifest(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "manifest.txt";
  return load_manifest(p);
}

void echo_config(const RunConfig& config, const fs::path& out_dir) {
  write_run_config(config, out_dir / "config.echo.cfg");
}

int cmd_render(const std::string& config_path, int count, const std::string& out,
               std::optional<std::uint64_t> seed, const std::string& veil) {
  RunConfig config = load_config_or_default(config_path);
  if (seed) config.scene.seed = *seed;
  if (!veil.empty()) {
    const bool on = veil == "on";
    if (!on && veil != "off") throw std::runtime_error("--veil expects on|off, got " + veil);
    if (on != config.scene.veil_enabled) {
      const RainSceneSpec base = config.scene;
      config.scene = default_scene_spec(base.height, base.width, on);
      config.scene.seed = base.seed;
      config.scene.beta_min = base.beta_min;
      config.scene.beta_max = base.beta_max;
      config.scene.atmospheric_min = base.atmospheric_min;
      config.scene.atmospheric_max = base.atmospheric_max;
      config.scene.orientations_deg = base.orientations_deg;
      config.scene.bins = base.bins;
    }
  }
  const DatasetManifest manifest = generate_dataset(config.scene, count, out);
  echo_config(config, out);
  std::printf("wrote %zu scenes\n", manifest.entries.size());
  std::printf("manifest: %s\n", (fs::path(out) / "manifest.txt").string().c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data,
              const std::string& holdout, const std::string& out,
              std::optional<int> epochs, std::optional<std::uint64_t> seed) {
  RunConfig config = load_config_or_default(config_path);
  if (epochs) config.train.epochs = *epochs;
  if (seed) {
    config.network.seed = *seed;
    config.train.shuffle_seed = *seed;
  }

  const DatasetManifest train_manifest = resolve_manifest(data);
  DatasetManifest holdout_manifest;
  const bool has_holdout = !holdout.empty();
  if (has_holdout) holdout_manifest = resolve_manifest(holdout);

  fs::create_directories(out);
  echo_config(config, out);
  config.train.checkpoint_dir = fs::path(out) / "checkpoints";
  config.train.log_csv = fs::path(out) / "training_log.csv";
  config.train.verbose = true;

  NetworkParams params = build_network(config.network);
  std::printf("training %s network: %lld parameters, %d epochs, %zu scenes\n",
              config.network.veil_enabled ? "veiled" : "streak-only",
              params.element_count(), config.train.epochs, train_manifest.entries.size());
  train(params, config.network, train_manifest, has_holdout ? &holdout_manifest : nullptr,
        config.train);
  std::printf("final checkpoint: %s\n",
              (config.train.checkpoint_dir / "final.smrc").string().c_str());
  std::printf("log: %s\n", config.train.log_csv.string().c_str());
  return 0;
}

void write_restored(const fs::path& out_dir, const std::string& stem, const Tensor& restored) {
  save_raw_tensor(out_dir / (stem + "_derained.drf"), restored);
  save_png(out_dir / (stem + "_derained.png"), restored);
}

int cmd_derain(const std::string& checkpoint, const std::string& input,
               const std::string& manifest_path, const std::string& out,
               const std::string& atmospheric) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  AtmosphericMode mode = AtmosphericMode::brightest_pixel();
  if (!atmospheric.empty() && atmospheric != "brightest") {
    mode = AtmosphericMode::known_value(std::stod(atmospheric));
  }
  fs::create_directories(out);

  if (!input.empty()) {
    const fs::path in_path(input);
    const Tensor observed =
        in_path.extension() == ".drf" ? load_raw_tensor(in_path) : load_png(in_path);
    const DerainResult result = derain::derain(ckpt.params, ckpt.config, observed, mode);
    write_restored(out, in_path.stem().string(), result.restored);
    std::printf("restored: %s\n", (fs::path(out) / (in_path.stem().string() + "_derained.png"))
                                      .string()
                                      .c_str());
    return 0;
  }
  if (manifest_path.empty()) {
    throw std::runtime_error("derain: pass --input IMAGE or --manifest CORPUS");
  }
  const DatasetManifest manifest = resolve_manifest(manifest_path);
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const Tensor observed =
        load_raw_tensor(manifest.root / manifest.entries[i].observed_path);
    const DerainResult result = derain::derain(ckpt.params, ckpt.config, observed, mode);
    write_restored(out, manifest.entries[i].id, result.restored);
  }
  std::printf("restored %zu scenes into %s\n", manifest.entries.size(), out.c_str());
  return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& restored,
                 const std::string& csv) {
  const DatasetManifest manifest = resolve_manifest(manifest_path);
  const MetricReport report = evaluate_corpus(manifest, restored);
  if (!csv.empty()) report.write_csv(csv);
  if (report.per_image.empty()) {
    std::printf("empty manifest, nothing to evaluate\n");
    return 0;
  }
  std::printf("images: %zu\n", report.per_image.size());
  std::printf("psnr_db: mean %.6f  min %.6f  max %.6f\n", report.psnr_db.mean, report.psnr_db.min,
              report.psnr_db.max);
  std::printf("ssim:    mean %.6f  min %.6f  max %.6f\n", report.ssim.mean, report.ssim.min,
              report.ssim.max);
  return 0;
}

int cmd_gradcheck(int seeds, int samples) {
  const GradientSuiteResult result = run_gradient_suite(seeds, samples);
  for (const auto& check : result.checks) {
    std::printf("%-32s %s\n", check.name.c_str(), check.report.summary().c_str());
  }
  std::printf("gradient suite: %s  (max_rel_err %.3g, %.1fs, %d checks)\n",
              result.passed ? "PASS" : "FAIL", result.max_rel_err, result.wall_seconds,
              static_cast<int>(result.checks.size()));
  return result.passed ? 0 : 1;
}

int cmd_ablate(const std::string& config_path, const std::string& data,
               const std::string& holdout, const std::string& modules_arg,
               const std::string& out_csv, std::optional<std::uint64_t> seed) {
  RunConfig config = load_config_or_default(config_path);
  if (seed) {
    config.network.seed = *seed;
    config.train.shuffle_seed = *seed;
  }

  AblationOptions options;
  options.base = config.network;
  options.train = config.train;
  options.module_counts.clear();
  std::istringstream mods(modules_arg);
  std::string item;
  while (std::getline(mods, item, ',')) options.module_counts.push_back(std::stoi(item));

  const DatasetManifest train_manifest = resolve_manifest(data);
  const DatasetManifest holdout_manifest = resolve_manifest(holdout);
  const AblationResult result = run_ablation(train_manifest, holdout_manifest, options);
  write_ablation_csv(result, out_csv);

  for (const auto& [modules, count] : result.parameter_counts) {
    std::printf("%d recurrent modules: %lld parameters\n", modules, count);
  }
  std::printf("per-epoch comparison: %s\n", out_csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-rain restoration laboratory"};
  app.require_subcommand(1);

  std::string config_path, out, input, manifest_path, restored, csv, veil, atmospheric_arg,
      holdout, modules_arg{"0,3"}, checkpoint;
  int count = 8, seeds = 5, samples = 24;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;

  auto* render = app.add_subcommand("render", "synthesize a rain corpus with ground truth");
  render->add_option("--config", config_path, "run configuration file");
  render->add_option("--count", count, "number of scenes")->check(CLI::NonNegativeNumber);
  render->add_option("--out", out, "output directory")->required();
  render->add_option("--seed", seed, "override the scene seed");
  render->add_option("--veil", veil, "on|off: override the veiling effect");

  auto* train_cmd = app.add_subcommand("train", "train a network on a rendered corpus");
  train_cmd->add_option("--config", config_path, "run configuration file");
  train_cmd->add_option("--data", manifest_path, "training corpus (manifest or its directory)")
      ->required();
  train_cmd->add_option("--holdout", holdout, "held-out corpus for per-epoch scoring");
  train_cmd->add_option("--out", out, "run output directory")->required();
  train_cmd->add_option("--epochs", epochs, "override epoch count");
  train_cmd->add_option("--seed", seed, "override init and shuffle seeds");

  auto* derain_cmd = app.add_subcommand("derain", "restore an image or corpus");
  derain_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint (.smrc)")->required();
  derain_cmd->add_option("--input", input, "rainy image (.png or .drf)");
  derain_cmd->add_option("--manifest", manifest_path, "corpus to restore instead of --input");
  derain_cmd->add_option("--out", out, "output directory")->required();
  derain_cmd->add_option("--atmospheric", atmospheric_arg,
                         "'brightest' (default) or a known scalar value");

  auto* evaluate = app.add_subcommand("evaluate", "score restored images against ground truth");
  evaluate->add_option("--manifest", manifest_path, "corpus manifest")->required();
  evaluate->add_option("--restored", restored, "directory of *_derained images")->required();
  evaluate->add_option("--csv", csv, "per-image report CSV path");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--seeds", seeds, "number of random seeds");
  gradcheck->add_option("--samples", samples, "probed elements per network tensor");

  auto* ablate = app.add_subcommand("ablate", "compare recurrent module counts");
  ablate->add_option("--config", config_path, "run configuration file");
  ablate->add_option("--data", manifest_path, "training corpus")->required();
  ablate->add_option("--holdout", holdout, "held-out corpus")->required();
  ablate->add_option("--modules", modules_arg, "comma list of module counts (default 0,3)");
  ablate->add_option("--out", out, "comparison CSV path")->required();
  ablate->add_option("--seed", seed, "override init and shuffle seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*render) return cmd_render(config_path, count, out, seed, veil);
    if (*train_cmd) return cmd_train(config_path, manifest_path, holdout, out, epochs, seed);
    if (*derain_cmd) return cmd_derain(checkpoint, input, manifest_path, out, atmospheric_arg);
    if (*evaluate) return cmd_evaluate(manifest_path, restored, csv);
    if (*gradcheck) return cmd_gradcheck(seeds, samples);
    if (*ablate) return cmd_ablate(config_path, manifest_path, holdout, modules_arg, out, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
