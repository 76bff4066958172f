#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "derain/rain_model.hpp"
#include "derain/tensor.hpp"

namespace derain {

/// Architecture hyperparameters. Desk-scale defaults keep the whole
/// network small enough for exhaustive finite-difference checking.
struct NetworkConfig {
  int scale_bins = 3;       // parallel recurrent sub-networks, one per streak size class;
                            // 0 selects the no-recurrent-module baseline that regresses
                            // the clean background directly from features
  int recurrent_iters = 4;  // refinement passes of each weight-shared block
  int stages = 2;           // subtraction/refinement rounds
  int features = 16;        // extractor output channels
  int dense_layers = 4;     // densely connected layers in the extractor
  int growth = 8;           // channels added per dense layer
  int kernel = 3;           // conv window (odd, so spatial extents are preserved)
  bool veil_enabled = false;
  bool shared_stages = false;  // one block per scale reused across stages
  std::uint64_t seed = 1;
};

/// Throws std::invalid_argument when the config is inconsistent.
void validate_config(const NetworkConfig& config);

/// Learnable tensors keyed by layer path, in creation order. The key set
/// is a pure function of the config.
class NetworkParams {
 public:
  void add(const std::string& key, Tensor t);
  Tensor& at(const std::string& key);
  const Tensor& at(const std::string& key) const;
  bool contains(const std::string& key) const { return index_.count(key) != 0; }
  const std::vector<std::string>& keys() const { return keys_; }
  size_t size() const { return keys_.size(); }

  /// All tensors in key order (e.g. to hand to an optimizer).
  std::vector<Tensor> tensors() const;
  long long element_count() const;

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, Tensor> index_;
};

/// Parameter keys the config implies, in creation order.
std::vector<std::string> parameter_keys(const NetworkConfig& config);

/// Closed form for parameter_keys(config).size():
///   2*(2 + dense_layers)                       feature extractor convs
/// + (scale_bins == 0 ? 4                       direct background head
///    : 6*scale_bins*(shared_stages ? 1 : stages))
/// + (veil_enabled ? 4 : 0)                     reciprocal-transmittance head
int parameter_key_count(const NetworkConfig& config);

/// Fan-in-scaled uniform init (relu gain), deterministic under the
/// config seed. Biases start at zero.
NetworkParams build_network(const NetworkConfig& config);

/// Every intermediate prediction of one forward pass. All spatial extents
/// equal the input's.
struct ForwardTrace {
  Tensor features;                              // shared representation F
  std::vector<std::vector<Tensor>> rain_maps;   // [stage][scale] per-stage estimates
  std::vector<Tensor> stage_outputs;            // T_j = T_{j-1} - sum_i maps[j][i], T_0 = O
  Tensor inv_alpha;                             // reciprocal transmittance, >= 1 (veil only)
  Tensor background;                            // recovered B-hat, unclamped, graph-carrying
  double atmospheric_used = 0.0;                // A used by the veiled recovery

  int stage_count() const { return static_cast<int>(rain_maps.size()); }
  int scale_count() const {
    return rain_maps.empty() ? 0 : static_cast<int>(rain_maps.front().size());
  }
  /// Total per-scale estimate accumulated through stage `upto` (1-based;
  /// 0 means all stages).
  Tensor cumulative_map(int scale, int upto = 0) const;
};

/// Runs the network. `observed` is (3,H,W) in [0,1]. When the veil head
/// is enabled, recovery needs the atmospheric light: pass it when known
/// (training) or leave empty to use the brightest-pixel estimate. The
/// recovery is arranged so that all-zero parameters reproduce the input
/// bit for bit.
ForwardTrace forward(const NetworkParams& params, const NetworkConfig& config,
                     const Tensor& observed, std::optional<double> atmospheric = std::nullopt);

/// Background reconstruction plus per-scale streak supervision: every
/// stage's cumulative estimate is scored against the same ground-truth
/// layer, weighted by stage_weights (all 1 when empty; the last entry
/// weights the final estimate).
Tensor loss_smrnet(const ForwardTrace& trace, const RainScene& scene,
                   const std::vector<double>& stage_weights = {});

/// loss_smrnet plus the reciprocal-transmittance term.
Tensor loss_smrnet_veil(const ForwardTrace& trace, const RainScene& scene,
                        const std::vector<double>& stage_weights = {});

/// How inference picks the atmospheric light.
struct AtmosphericMode {
  bool known = false;
  double value = 1.0;
  static AtmosphericMode known_value(double a) { return {true, a}; }
  static AtmosphericMode brightest_pixel() { return {false, 0.0}; }
};

struct DerainResult {
  Tensor restored;  // clamped to [0,1]
  ForwardTrace trace;
};

DerainResult derain(const NetworkParams& params, const NetworkConfig& config,
                    const Tensor& observed,
                    AtmosphericMode mode = AtmosphericMode::brightest_pixel());

// Versioned binary checkpoint: magic "SMRC", version, config echo, then
// named tensors in key order as 64-bit little-endian payloads. Loading
// fails when the stored key set does not match the stored config.
void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const NetworkConfig& config);
struct Checkpoint {
  NetworkConfig config;
  NetworkParams params;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace derain
