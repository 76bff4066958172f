#include "derain/smrnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "derain/rng.hpp"

namespace derain {

void validate_config(const NetworkConfig& c) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("NetworkConfig: " + msg); };
  if (c.scale_bins < 0) fail("scale_bins must be >= 0");
  if (c.recurrent_iters < 1) fail("recurrent_iters must be >= 1");
  if (c.stages < 1) fail("stages must be >= 1");
  if (c.features < 1 || c.growth < 1 || c.dense_layers < 1) fail("channel counts must be >= 1");
  if (c.kernel < 1 || c.kernel % 2 == 0) fail("kernel must be odd so spatial extents are kept");
  if (c.veil_enabled && c.scale_bins == 0) {
    fail("the direct-background baseline has no veil head");
  }
}

void NetworkParams::add(const std::string& key, Tensor t) {
  if (index_.count(key)) throw std::invalid_argument("NetworkParams: duplicate key " + key);
  keys_.push_back(key);
  index_.emplace(key, std::move(t));
}

Tensor& NetworkParams::at(const std::string& key) {
  auto it = index_.find(key);
  if (it == index_.end()) throw std::out_of_range("NetworkParams: no key " + key);
  return it->second;
}

const Tensor& NetworkParams::at(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw std::out_of_range("NetworkParams: no key " + key);
  return it->second;
}

std::vector<Tensor> NetworkParams::tensors() const {
  std::vector<Tensor> out;
  out.reserve(keys_.size());
  for (const auto& k : keys_) out.push_back(index_.at(k));
  return out;
}

long long NetworkParams::element_count() const {
  long long n = 0;
  for (const auto& k : keys_) n += index_.at(k).numel();
  return n;
}

namespace {

int stage_input_channels(const NetworkConfig& c, int stage) {
  if (c.shared_stages) return c.features + 3 + 3 * c.scale_bins + 3;
  if (stage == 1) return c.features + 3;
  return c.features + 3 + 3 * c.scale_bins * (stage - 1) + 3;
}

// Every conv layer the config implies, in creation order.
// fn(key_base, in_channels, out_channels)
template <class Fn>
void for_each_conv(const NetworkConfig& c, Fn&& fn) {
  fn("features.in", 3, c.features);
  int cat = c.features;
  for (int l = 1; l <= c.dense_layers; ++l) {
    fn("features.dense" + std::to_string(l), cat, c.growth);
    cat += c.growth;
  }
  fn("features.fuse", cat, c.features);

  if (c.scale_bins == 0) {
    fn("direct.conv1", c.features, c.features);
    fn("direct.conv2", c.features, 3);
  } else {
    const int stage_blocks = c.shared_stages ? 1 : c.stages;
    for (int j = 1; j <= stage_blocks; ++j) {
      const int in_ch = stage_input_channels(c, j);
      for (int i = 1; i <= c.scale_bins; ++i) {
        const std::string base = c.shared_stages
                                     ? "shared.scale" + std::to_string(i)
                                     : "stage" + std::to_string(j) + ".scale" + std::to_string(i);
        fn(base + ".a", in_ch, c.features);
        fn(base + ".b", c.features, c.features);
        fn(base + ".c", c.features, 3);
      }
    }
  }
  if (c.veil_enabled) {
    fn("veil.conv1", c.features, c.features);
    fn("veil.conv2", c.features, 1);
  }
}

}  // namespace

std::vector<std::string> parameter_keys(const NetworkConfig& config) {
  validate_config(config);
  std::vector<std::string> keys;
  for_each_conv(config, [&](const std::string& base, int, int) {
    keys.push_back(base + ".w");
    keys.push_back(base + ".b");
  });
  return keys;
}

int parameter_key_count(const NetworkConfig& c) {
  int count = 2 * (2 + c.dense_layers);
  if (c.scale_bins == 0) {
    count += 4;
  } else {
    count += 6 * c.scale_bins * (c.shared_stages ? 1 : c.stages);
  }
  if (c.veil_enabled) count += 4;
  return count;
}

NetworkParams build_network(const NetworkConfig& config) {
  validate_config(config);
  NetworkParams params;
  Rng rng(split_seed(config.seed, 0xB117D));
  const int k = config.kernel;
  for_each_conv(config, [&](const std::string& base, int in_ch, int out_ch) {
    const int fan_in = in_ch * k * k;
    const double bound = std::sqrt(6.0 / fan_in);  // uniform He init, relu gain
    std::vector<double> w(static_cast<size_t>(out_ch) * in_ch * k * k);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    params.add(base + ".w", Tensor::from_data({out_ch, in_ch, k, k}, std::move(w), true));
    params.add(base + ".b", Tensor::zeros({out_ch}, true));
  });
  return params;
}

namespace {

Tensor conv_layer(const Tensor& x, const NetworkParams& params, const std::string& base, int pad) {
  return conv2d(x, params.at(base + ".w"), params.at(base + ".b"), 1, pad);
}

Tensor extract_features(const NetworkParams& params, const NetworkConfig& config,
                        const Tensor& observed) {
  const int pad = config.kernel / 2;
  Tensor cat = relu(conv_layer(observed, params, "features.in", pad));
  for (int l = 1; l <= config.dense_layers; ++l) {
    const Tensor grown = relu(conv_layer(cat, params, "features.dense" + std::to_string(l), pad));
    cat = concat_channels({cat, grown});
  }
  return relu(conv_layer(cat, params, "features.fuse", pad));
}

}  // namespace

Tensor ForwardTrace::cumulative_map(int scale, int upto) const {
  const int stages = stage_count();
  const int last = upto <= 0 ? stages : upto;
  Tensor acc = rain_maps.at(0).at(static_cast<size_t>(scale));
  for (int j = 1; j < last; ++j) {
    acc = add(acc, rain_maps.at(static_cast<size_t>(j)).at(static_cast<size_t>(scale)));
  }
  return acc;
}

ForwardTrace forward(const NetworkParams& params, const NetworkConfig& config,
                     const Tensor& observed, std::optional<double> atmospheric) {
  validate_config(config);
  if (!observed.valid() || observed.rank() != 3 || observed.dim(0) != 3) {
    throw std::invalid_argument("forward: observed image must be (3,H,W)" +
                                (observed.valid() ? ", got " + shape_str(observed.shape()) : std::string()));
  }
  const int H = observed.dim(1), W = observed.dim(2);
  const int pad = config.kernel / 2;
  const int K = config.scale_bins;

  ForwardTrace trace;
  trace.features = extract_features(params, config, observed);

  if (K == 0) {
    const Tensor hidden = relu(conv_layer(trace.features, params, "direct.conv1", pad));
    trace.background = conv_layer(hidden, params, "direct.conv2", pad);
    return trace;
  }

  Tensor carried = observed;  // T_0
  for (int j = 1; j <= config.stages; ++j) {
    std::vector<Tensor> stage_maps;
    stage_maps.reserve(static_cast<size_t>(K));
    for (int i = 1; i <= K; ++i) {
      const std::string base = config.shared_stages
                                   ? "shared.scale" + std::to_string(i)
                                   : "stage" + std::to_string(j) + ".scale" + std::to_string(i);
      Tensor pred = Tensor::zeros({3, H, W});
      for (int t = 0; t < config.recurrent_iters; ++t) {
        std::vector<Tensor> parts;
        parts.push_back(trace.features);
        if (config.shared_stages) {
          parts.push_back(carried);
          if (j == 1) {
            parts.push_back(Tensor::zeros({3 * K, H, W}));
          } else {
            for (const auto& m : trace.rain_maps.back()) parts.push_back(m);
          }
        } else if (j >= 2) {
          parts.push_back(carried);
          for (const auto& stage : trace.rain_maps) {
            for (const auto& m : stage) parts.push_back(m);
          }
        }
        parts.push_back(pred);
        const Tensor input = concat_channels(parts);
        const Tensor h1 = relu(conv_layer(input, params, base + ".a", pad));
        const Tensor h2 = relu(add(conv_layer(h1, params, base + ".b", pad), h1));
        pred = conv_layer(h2, params, base + ".c", pad);
      }
      stage_maps.push_back(pred);
    }
    Tensor next = carried;
    for (const auto& m : stage_maps) next = sub(next, m);
    trace.rain_maps.push_back(std::move(stage_maps));
    trace.stage_outputs.push_back(next);
    carried = next;
  }

  if (config.veil_enabled) {
    const Tensor hidden = relu(conv_layer(trace.features, params, "veil.conv1", pad));
    // excess = inv_alpha - 1 >= 0, so the head can never claim alpha > 1.
    const Tensor excess = relu(conv_layer(hidden, params, "veil.conv2", pad));
    trace.inv_alpha = add(excess, 1.0);
    const double a = atmospheric ? *atmospheric : estimate_atmospheric_light(observed);
    trace.atmospheric_used = a;
    // inv_alpha .* (O - A) - sum(R) + A, written as
    // (1 + excess) .* O - excess .* A - sum(R): identical algebra, and the
    // all-zero network reproduces O exactly instead of (O - A) + A.
    Tensor recovered = sub(mul(trace.inv_alpha, observed), mul(excess, Tensor::scalar(a)));
    for (const auto& stage : trace.rain_maps) {
      for (const auto& m : stage) recovered = sub(recovered, m);
    }
    trace.background = recovered;
  } else {
    trace.background = carried;
  }
  return trace;
}

namespace {

std::vector<double> resolve_stage_weights(const std::vector<double>& weights, int stages) {
  if (weights.empty()) return std::vector<double>(static_cast<size_t>(stages), 1.0);
  if (static_cast<int>(weights.size()) != stages) {
    throw std::invalid_argument("loss: expected " + std::to_string(stages) +
                                " stage weights, got " + std::to_string(weights.size()));
  }
  return weights;
}

}  // namespace

Tensor loss_smrnet(const ForwardTrace& trace, const RainScene& scene,
                   const std::vector<double>& stage_weights) {
  Tensor total = reduce_mse(trace.background, scene.background);
  const int stages = trace.stage_count();
  const int scales = trace.scale_count();
  if (scales == 0) return total;  // direct baseline: background term only

  if (static_cast<int>(scene.streak_layers.size()) != scales) {
    throw std::invalid_argument("loss_smrnet: scene has " +
                                std::to_string(scene.streak_layers.size()) +
                                " streak layers but the network predicts " +
                                std::to_string(scales));
  }
  const std::vector<double> w = resolve_stage_weights(stage_weights, stages);
  for (int j = 1; j <= stages; ++j) {
    if (w[static_cast<size_t>(j - 1)] == 0.0) continue;
    for (int i = 0; i < scales; ++i) {
      Tensor term = reduce_mse(trace.cumulative_map(i, j),
                               scene.streak_layers[static_cast<size_t>(i)]);
      if (w[static_cast<size_t>(j - 1)] != 1.0) {
        term = mul(term, w[static_cast<size_t>(j - 1)]);
      }
      total = add(total, term);
    }
  }
  return total;
}

Tensor loss_smrnet_veil(const ForwardTrace& trace, const RainScene& scene,
                        const std::vector<double>& stage_weights) {
  if (!trace.inv_alpha.valid()) {
    throw std::invalid_argument("loss_smrnet_veil: trace carries no reciprocal-transmittance map");
  }
  if (!scene.transmittance.valid()) {
    throw std::invalid_argument("loss_smrnet_veil: scene carries no transmittance ground truth");
  }
  const Tensor target = reciprocal(scene.transmittance);
  return add(loss_smrnet(trace, scene, stage_weights), reduce_mse(trace.inv_alpha, target));
}

DerainResult derain(const NetworkParams& params, const NetworkConfig& config,
                    const Tensor& observed, AtmosphericMode mode) {
  std::optional<double> a;
  if (mode.known) a = mode.value;
  DerainResult result;
  result.trace = forward(params, config, observed, a);
  result.restored = clamp01(result.trace.background);
  return result;
}

// --------------------------------------------------------------------------
// Checkpoint format

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'M', 'R', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  const unsigned char* p;
  const unsigned char* end;
  std::string path;

  void need(size_t n) const {
    if (static_cast<size_t>(end - p) < n) {
      throw std::runtime_error("load_checkpoint: truncated file: " + path);
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    p += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const NetworkConfig& config) {
  std::string out;
  out.append(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(config.scale_bins));
  put_u32(out, static_cast<std::uint32_t>(config.recurrent_iters));
  put_u32(out, static_cast<std::uint32_t>(config.stages));
  put_u32(out, static_cast<std::uint32_t>(config.features));
  put_u32(out, static_cast<std::uint32_t>(config.dense_layers));
  put_u32(out, static_cast<std::uint32_t>(config.growth));
  put_u32(out, static_cast<std::uint32_t>(config.kernel));
  put_u32(out, (config.veil_enabled ? 1u : 0u) | (config.shared_stages ? 2u : 0u));
  put_u64(out, config.seed);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& key : params.keys()) {
    const Tensor& t = params.at(key);
    put_u32(out, static_cast<std::uint32_t>(key.size()));
    out += key;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) put_u32(out, static_cast<std::uint32_t>(t.dim(d)));
    for (double v : t.data()) put_f64(out, v);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("save_checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()),
           reinterpret_cast<const unsigned char*>(bytes.data()) + bytes.size(), path.string()};
  if (r.str(4) != std::string(kCheckpointMagic, 4)) {
    throw std::runtime_error("load_checkpoint: bad magic: " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  ckpt.config.scale_bins = static_cast<int>(r.u32());
  ckpt.config.recurrent_iters = static_cast<int>(r.u32());
  ckpt.config.stages = static_cast<int>(r.u32());
  ckpt.config.features = static_cast<int>(r.u32());
  ckpt.config.dense_layers = static_cast<int>(r.u32());
  ckpt.config.growth = static_cast<int>(r.u32());
  ckpt.config.kernel = static_cast<int>(r.u32());
  const std::uint32_t flags = r.u32();
  ckpt.config.veil_enabled = (flags & 1u) != 0;
  ckpt.config.shared_stages = (flags & 2u) != 0;
  ckpt.config.seed = r.u64();

  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t keylen = r.u32();
    const std::string key = r.str(keylen);
    const std::uint32_t rank = r.u32();
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
    const int n = shape_numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (int e = 0; e < n; ++e) data[static_cast<size_t>(e)] = r.f64();
    ckpt.params.add(key, Tensor::from_data(shape, std::move(data), true));
  }

  // The stored key sequence must be exactly what the stored config implies.
  const std::vector<std::string> expected = parameter_keys(ckpt.config);
  if (ckpt.params.keys() != expected) {
    throw std::runtime_error("load_checkpoint: parameter keys do not match the stored config: " +
                             path.string());
  }
  for_each_conv(ckpt.config, [&](const std::string& base, int in_ch, int out_ch) {
    const Shape w_shape = {out_ch, in_ch, ckpt.config.kernel, ckpt.config.kernel};
    if (ckpt.params.at(base + ".w").shape() != w_shape ||
        ckpt.params.at(base + ".b").shape() != Shape{out_ch}) {
      throw std::runtime_error("load_checkpoint: tensor extents for " + base +
                               " do not match the stored config: " + path.string());
    }
  });
  return ckpt;
}

}  // namespace derain
