#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "derain/datagen.hpp"
#include "derain/tensor.hpp"

namespace derain {

/// Peak signal-to-noise ratio in dB for images in [0,1] (MAX = 1), capped
/// at kPsnrCapDb; identical images report the cap.
double psnr(const Tensor& x, const Tensor& y);

/// Mean local structural similarity over valid (fully interior) window
/// positions, Gaussian-weighted 11x11 window with sigma 1.5, k1 = 0.01,
/// k2 = 0.03. Color images score as the channel mean of per-channel SSIM.
/// Requires both spatial extents >= the window size.
double ssim(const Tensor& x, const Tensor& y);

struct ImageScore {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricAggregate {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct MetricReport {
  std::vector<ImageScore> per_image;
  MetricAggregate psnr_db;
  MetricAggregate ssim;

  static MetricReport from_scores(std::vector<ImageScore> scores);
  /// Header line then one row per image, 6-decimal fixed point.
  void write_csv(const std::filesystem::path& file) const;
};

/// Scores every manifest entry's restored image against its clean ground
/// truth. Restored images live in `restored_dir` as "<id>_derained.drf"
/// (preferred, lossless) or "<id>_derained.png". All missing ids are
/// reported together in one error.
MetricReport evaluate_corpus(const DatasetManifest& manifest,
                             const std::filesystem::path& restored_dir);

}  // namespace derain
