#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "derain/rain_model.hpp"
#include "derain/rng.hpp"
#include "derain/tensor.hpp"

namespace derain {

/// Per-bin synthesis controls: how many streaks to draw and how bright
/// their peaks may be.
struct BinSpec {
  StreakBin bin;
  int count_min = 0;
  int count_max = 0;
  double intensity_min = 0.1;
  double intensity_max = 0.4;
};

/// Declarative description of one synthetic scene (or a corpus template).
struct RainSceneSpec {
  std::uint64_t seed = 1;
  int height = 64;
  int width = 64;
  std::vector<BinSpec> bins;              // one layer per entry
  std::vector<double> orientations_deg;   // angles from vertical
  double beta_min = 0.3;                  // attenuation range; fixed when min == max
  double beta_max = 1.0;
  double atmospheric_min = 0.8;           // scene-wide scalar A range
  double atmospheric_max = 1.0;
  bool veil_enabled = false;
  std::string background_kind = "value_noise";
  std::string depth_kind = "ramps_blobs";
};

/// 11 angles evenly spaced over [-55, +55] degrees from vertical.
std::vector<double> default_orientations();

/// Desk-scale defaults: the three standard bins with counts scaled by
/// image area so small streaks stay densest and large streaks sparsest.
RainSceneSpec default_scene_spec(int height, int width, bool veil_enabled);

/// One rendered streak, with its measured footprint area in pixels.
struct StreakRecord {
  int bin_index = 0;
  int area_px = 0;
  double angle_deg = 0.0;
  double peak = 0.0;
};

struct StreakLayer {
  Tensor map;  // (3,H,W), >= 0
  std::vector<StreakRecord> streaks;
};

/// Renders one scale bin's streak map. Streaks are anti-aliased capsule
/// segments with a Gaussian cross-section, blended additively; each
/// streak's rendered footprint area is guaranteed to land inside the
/// bin's interval (the renderer measures and rescales until it does).
/// Throws when the bin's range cannot be reached at this image size.
StreakLayer render_streak_layer(const RainSceneSpec& spec, int bin_index, Rng& rng);

struct SceneBundle {
  RainScene scene;
  std::vector<StreakRecord> streaks;
};

/// Fully realizes a spec: procedural background (and depth when veiled),
/// per-bin streak layers, transmittance, and the observed composite.
SceneBundle render_scene(const RainSceneSpec& spec);

struct ManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
  int height = 0;
  int width = 0;
  bool veil = false;
  double beta = 0.0;
  double atmospheric = 1.0;
  std::string observed_path;
  std::string background_path;
  std::string alpha_path;  // "-" when the scene carries no veil
  std::string depth_path;  // "-" when the scene carries no veil
  std::vector<std::string> layer_paths;
  std::vector<StreakRecord> streaks;
};

/// Line-oriented corpus index. First line is "DRMAN <version>"; then
/// "spec" records echoing the generating template, one "scene" record per
/// entry (id seed H W veil beta A nbins paths...), and one "streak"
/// record per rendered streak (scene-id bin area angle peak). Paths are
/// relative to the manifest's directory.
struct DatasetManifest {
  int version = 1;
  std::filesystem::path root;
  RainSceneSpec spec;
  std::vector<ManifestEntry> entries;
};

/// Renders `count` scenes with per-scene seeds derived from the template
/// seed, writes ground truth as raw tensors plus PNG previews, and writes
/// manifest.txt. Bit-exact given the template.
DatasetManifest generate_dataset(const RainSceneSpec& spec_template, int count,
                                 const std::filesystem::path& out_dir);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& file);
DatasetManifest load_manifest(const std::filesystem::path& file);

/// Loads one entry's full ground-truth bundle from disk.
RainScene load_scene(const DatasetManifest& manifest, size_t index);

/// Re-checks every entry: files load, scene invariants hold, streak areas
/// sit inside their declared bins. Returns violations, empty when clean.
std::vector<std::string> verify_corpus(const DatasetManifest& manifest);

}  // namespace derain
