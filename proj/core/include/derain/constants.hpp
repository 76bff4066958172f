#pragma once

namespace derain {

// Lower bound for transmittance maps and for reciprocal() inputs.
// Transmittance is clamped to [kEpsRecip, 1] wherever it is produced,
// so 1/alpha stays finite everywhere.
inline constexpr double kEpsRecip = 1e-3;

// PSNR reported for identical images (MSE == 0) and used as a cap,
// so reports stay finite and sortable.
inline constexpr double kPsnrCapDb = 99.0;

// SSIM constants of the standard formulation, for data in [0, 1].
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// A rendered streak's occupied area is the number of pixels whose
// normalized cross-section profile exceeds this fraction of the peak.
inline constexpr double kStreakFootprintThreshold = 0.02;

}  // namespace derain
