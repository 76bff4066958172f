#pragma once

#include <filesystem>

#include "derain/tensor.hpp"

namespace derain {

// Lossless raw tensor file: 16-byte header (magic "DRF1", then C, H, W as
// little-endian u32) followed by C*H*W little-endian IEEE-754 doubles in
// row-major order. Tensors of rank below 3 are stored with leading extents
// of 1; loading always yields a rank-3 tensor.
void save_raw_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_raw_tensor(const std::filesystem::path& path);

// 8-bit PNG previews. Values are clamped to [0,1] and quantized with
// round(v * 255). Color expects (3,H,W); gray expects (1,H,W).
void save_png(const std::filesystem::path& path, const Tensor& t);

/// Decodes an 8-bit PNG to a (3,H,W) tensor in [0,1]; grayscale files are
/// replicated across the three channels, alpha is dropped.
Tensor load_png(const std::filesystem::path& path);

}  // namespace derain
