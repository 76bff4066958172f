#pragma once

#include <filesystem>
#include <string>

#include "derain/datagen.hpp"
#include "derain/smrnet.hpp"
#include "derain/trainer.hpp"

namespace derain {

/// Effective settings of one lab run: network architecture, scene
/// synthesis template, and training options.
///
/// The on-disk grammar is line oriented: `[section]` headers ([network],
/// [scene], [train]), `key = value` assignments, and full-line `#`
/// comments. Unknown sections or keys are rejected. Values given before
/// any section header are rejected too.
struct RunConfig {
  NetworkConfig network;
  RainSceneSpec scene;
  TrainOptions train;

  // Orientation list shorthand used to materialize scene.orientations_deg.
  int orientation_count = 11;
  double orientation_span_deg = 55.0;
};

/// Defaults: 64x64 scenes, no veil, desk-scale network.
RunConfig default_run_config();

/// Parses a config file over the defaults. Throws std::runtime_error with
/// the offending line on malformed input, unknown sections, or unknown keys.
RunConfig load_run_config(const std::filesystem::path& path);

/// Writes every effective setting in the input grammar (reparseable),
/// used to echo the full configuration next to a run's outputs.
void write_run_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace derain
