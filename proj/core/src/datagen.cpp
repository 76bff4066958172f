#include "derain/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "derain/constants.hpp"
#include "derain/image_io.hpp"
#include "derain/parallel.hpp"

namespace derain {
namespace {

// Distinct sub-streams of a scene seed, so toggling the veil or the bin
// list never shifts the other fields' draws.
constexpr std::uint64_t kStreamBackground = 1;
constexpr std::uint64_t kStreamDepth = 2;
constexpr std::uint64_t kStreamParams = 3;
constexpr std::uint64_t kStreamBinBase = 16;
constexpr std::uint64_t kStreamSceneBase = 4096;

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Multi-octave value noise in [0,1].
std::vector<double> value_noise_field(int H, int W, Rng& rng) {
  std::vector<double> field(static_cast<size_t>(H) * W, 0.0);
  double amplitude = 1.0;
  double total = 0.0;
  int cell = std::max(4, std::min(H, W) / 2);
  for (int octave = 0; octave < 4; ++octave) {
    const int gx = W / cell + 2;
    const int gy = H / cell + 2;
    std::vector<double> lattice(static_cast<size_t>(gx) * gy);
    for (auto& v : lattice) v = rng.uniform01();
    for (int y = 0; y < H; ++y) {
      const double v = static_cast<double>(y) / cell;
      const int iy = static_cast<int>(v);
      const double fy = smoothstep(v - iy);
      for (int x = 0; x < W; ++x) {
        const double u = static_cast<double>(x) / cell;
        const int ix = static_cast<int>(u);
        const double fx = smoothstep(u - ix);
        const double v00 = lattice[static_cast<size_t>(iy) * gx + ix];
        const double v10 = lattice[static_cast<size_t>(iy) * gx + ix + 1];
        const double v01 = lattice[static_cast<size_t>(iy + 1) * gx + ix];
        const double v11 = lattice[static_cast<size_t>(iy + 1) * gx + ix + 1];
        const double top = v00 + (v10 - v00) * fx;
        const double bottom = v01 + (v11 - v01) * fx;
        field[static_cast<size_t>(y) * W + x] += amplitude * (top + (bottom - top) * fy);
      }
    }
    total += amplitude;
    amplitude *= 0.5;
    cell = std::max(2, cell / 2);
  }
  for (auto& v : field) v /= total;
  return field;
}

Tensor procedural_background(int H, int W, Rng& rng) {
  // Two palette colors blended by noise plus a soft directional gradient.
  double c0[3], c1[3];
  for (double& v : c0) v = rng.uniform(0.05, 0.95);
  for (double& v : c1) v = rng.uniform(0.05, 0.95);
  const double gx = rng.uniform(-1.0, 1.0);
  const double gy = rng.uniform(-1.0, 1.0);
  const std::vector<double> noise = value_noise_field(H, W, rng);

  std::vector<double> data(static_cast<size_t>(3) * H * W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double grad =
          (gx * (static_cast<double>(x) / W - 0.5) + gy * (static_cast<double>(y) / H - 0.5)) + 0.5;
      double t = 0.65 * noise[static_cast<size_t>(y) * W + x] + 0.35 * std::clamp(grad, 0.0, 1.0);
      t = std::clamp(t, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        data[(static_cast<size_t>(c) * H + y) * W + x] = c0[c] + (c1[c] - c0[c]) * t;
      }
    }
  }
  return Tensor::from_data({3, H, W}, std::move(data));
}

// Planar ramp plus Gaussian blobs, rescaled into a sampled [near, far]
// range. Units are arbitrary scene meters.
Tensor procedural_depth(int H, int W, Rng& rng) {
  const double ax = rng.uniform(-1.0, 1.0);
  const double ay = rng.uniform(-1.0, 1.0);
  const int blob_count = rng.uniform_int(2, 4);
  struct Blob {
    double cx, cy, sigma, amp;
  };
  std::vector<Blob> blobs(static_cast<size_t>(blob_count));
  for (auto& b : blobs) {
    b.cx = rng.uniform(0.0, static_cast<double>(W));
    b.cy = rng.uniform(0.0, static_cast<double>(H));
    b.sigma = rng.uniform(0.12, 0.3) * std::min(H, W);
    b.amp = rng.uniform(-0.5, 0.9);
  }
  const double near = rng.uniform(0.2, 0.8);
  const double far = rng.uniform(2.5, 6.0);

  std::vector<double> raw(static_cast<size_t>(H) * W);
  double lo = 1e300, hi = -1e300;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double v = (ax * (static_cast<double>(x) / W - 0.5) +
                  ay * (static_cast<double>(y) / H - 0.5)) +
                 0.5;
      for (const auto& b : blobs) {
        const double dx = x - b.cx, dy = y - b.cy;
        v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      raw[static_cast<size_t>(y) * W + x] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (auto& v : raw) v = near + (far - near) * ((v - lo) / span);
  return Tensor::from_data({1, H, W}, std::move(raw));
}

// Footprint radius of the Gaussian cross-section at the area threshold.
const double kProfileReach = std::sqrt(-2.0 * std::log(kStreakFootprintThreshold));

struct Capsule {
  double cx, cy;    // center, pixel coordinates
  double dx, dy;    // unit direction (angle measured from vertical)
  double half_len;  // distance from center to each cap center
  double sigma;     // cross-section Gaussian sigma
};

// Counts (and optionally blends) the capsule's thresholded footprint.
int rasterize_capsule(const Capsule& cap, double peak, int H, int W, std::vector<double>* out) {
  const double reach = cap.sigma * kProfileReach;
  const double ex = std::abs(cap.dx) * cap.half_len + reach + 1.0;
  const double ey = std::abs(cap.dy) * cap.half_len + reach + 1.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(cap.cx - ex)));
  const int x1 = std::min(W - 1, static_cast<int>(std::ceil(cap.cx + ex)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cap.cy - ey)));
  const int y1 = std::min(H - 1, static_cast<int>(std::ceil(cap.cy + ey)));

  int area = 0;
  const double inv2s2 = 1.0 / (2.0 * cap.sigma * cap.sigma);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5 - cap.cx;
      const double py = y + 0.5 - cap.cy;
      // Distance to the segment spanning +-half_len along (dx,dy).
      const double t = std::clamp(px * cap.dx + py * cap.dy, -cap.half_len, cap.half_len);
      const double qx = px - t * cap.dx;
      const double qy = py - t * cap.dy;
      const double d2 = qx * qx + qy * qy;
      const double profile = std::exp(-d2 * inv2s2);
      if (profile > kStreakFootprintThreshold) {
        ++area;
        if (out) (*out)[static_cast<size_t>(y) * W + x] += peak * profile;
      }
    }
  }
  return area;
}

double bin_aspect_lo(StreakBin::Label label) {
  return label == StreakBin::Label::large ? 2.2 : 2.8;
}
double bin_aspect_hi(StreakBin::Label label) {
  return label == StreakBin::Label::small ? 7.0 : 5.5;
}

}  // namespace

std::vector<double> default_orientations() {
  std::vector<double> angles;
  angles.reserve(11);
  for (int i = 0; i < 11; ++i) angles.push_back(-55.0 + 11.0 * i);
  return angles;
}

RainSceneSpec default_scene_spec(int height, int width, bool veil_enabled) {
  RainSceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.veil_enabled = veil_enabled;
  spec.orientations_deg = default_orientations();

  // Counts follow image area, denser for small streaks; reference counts
  // are for 64x64.
  const double ratio = static_cast<double>(height) * width / 4096.0;
  auto scaled = [&](int base, int floor_count) {
    return std::max(floor_count, static_cast<int>(std::lround(base * ratio)));
  };
  const auto& bins = standard_bins();
  spec.bins = {
      {bins[0], scaled(8, 1), scaled(14, 2), 0.12, 0.40},
      {bins[1], scaled(2, 0), scaled(4, 1), 0.15, 0.45},
      {bins[2], scaled(0, 0), scaled(1, 1), 0.20, 0.55},
  };
  return spec;
}

StreakLayer render_streak_layer(const RainSceneSpec& spec, int bin_index, Rng& rng) {
  if (bin_index < 0 || bin_index >= static_cast<int>(spec.bins.size())) {
    throw std::invalid_argument("render_streak_layer: bin index " + std::to_string(bin_index) +
                                " out of range");
  }
  const BinSpec& bin_spec = spec.bins[static_cast<size_t>(bin_index)];
  const StreakBin& bin = bin_spec.bin;
  const int H = spec.height, W = spec.width;

  // Feasibility: the biggest capsule we are willing to draw.
  const double max_r = 0.22 * std::min(H, W);
  const double max_len = 0.95 * std::min(H, W);
  const double max_area = 2.0 * max_r * max_len + 3.14159265358979 * max_r * max_r;
  if (bin.area_lo + 1.0 > max_area) {
    throw std::runtime_error(std::string("render_streak_layer: bin '") + bin.name() +
                             "' unreachable at " + std::to_string(H) + "x" + std::to_string(W));
  }

  std::vector<double> plane(static_cast<size_t>(H) * W, 0.0);
  StreakLayer layer;
  const int count = rng.uniform_int(bin_spec.count_min, bin_spec.count_max);

  for (int s = 0; s < count; ++s) {
    bool placed = false;
    for (int attempt = 0; attempt < 25 && !placed; ++attempt) {
      const double span = bin.area_hi - bin.area_lo;
      const double target = rng.uniform(bin.area_lo + 0.08 * span, bin.area_lo + 0.90 * span);
      const double aspect = rng.uniform(bin_aspect_lo(bin.label), bin_aspect_hi(bin.label));
      const double angle =
          spec.orientations_deg[static_cast<size_t>(rng.uniform_int(
              0, static_cast<int>(spec.orientations_deg.size()) - 1))];
      const double rad = angle * 3.14159265358979 / 180.0;

      Capsule cap;
      cap.dx = std::sin(rad);
      cap.dy = std::cos(rad);
      cap.cx = rng.uniform(0.08 * W, 0.92 * W);
      cap.cy = rng.uniform(0.08 * H, 0.92 * H);
      // Solve 2rL + pi r^2 = target with L = 2r * aspect.
      double r = std::sqrt(target / (4.0 * aspect + 3.14159265358979));
      for (int refine = 0; refine < 6; ++refine) {
        cap.half_len = std::min(r * aspect, max_len / 2.0);
        cap.sigma = r / kProfileReach;
        const int measured = rasterize_capsule(cap, 0.0, H, W, nullptr);
        if (bin.contains(static_cast<double>(measured))) {
          const double peak = rng.uniform(bin_spec.intensity_min, bin_spec.intensity_max);
          rasterize_capsule(cap, peak, H, W, &plane);
          layer.streaks.push_back({bin_index, measured, angle, peak});
          placed = true;
          break;
        }
        if (measured <= 0) break;  // fully clipped; resample position
        double scale = std::sqrt(target / measured);
        scale = std::clamp(scale, 0.6, 1.6);
        r *= scale;
      }
    }
    if (!placed) {
      throw std::runtime_error(std::string("render_streak_layer: could not fit a '") + bin.name() +
                               "' streak at " + std::to_string(H) + "x" + std::to_string(W));
    }
  }

  std::vector<double> rgb(static_cast<size_t>(3) * H * W);
  for (int c = 0; c < 3; ++c) {
    std::copy(plane.begin(), plane.end(), rgb.begin() + static_cast<size_t>(c) * H * W);
  }
  layer.map = Tensor::from_data({3, H, W}, std::move(rgb));
  return layer;
}

SceneBundle render_scene(const RainSceneSpec& spec) {
  const int H = spec.height, W = spec.width;
  SceneBundle bundle;
  RainScene& scene = bundle.scene;

  Rng bg_rng(split_seed(spec.seed, kStreamBackground));
  scene.background = procedural_background(H, W, bg_rng);

  Rng param_rng(split_seed(spec.seed, kStreamParams));
  const double atmospheric = param_rng.uniform(spec.atmospheric_min, spec.atmospheric_max);
  scene.atmospheric_light = Tensor::scalar(atmospheric);

  for (size_t i = 0; i < spec.bins.size(); ++i) {
    Rng bin_rng(split_seed(spec.seed, kStreamBinBase + i));
    StreakLayer layer = render_streak_layer(spec, static_cast<int>(i), bin_rng);
    scene.streak_layers.push_back(layer.map);
    bundle.streaks.insert(bundle.streaks.end(), layer.streaks.begin(), layer.streaks.end());
  }

  if (spec.veil_enabled) {
    Rng depth_rng(split_seed(spec.seed, kStreamDepth));
    scene.depth = procedural_depth(H, W, depth_rng);
    scene.attenuation_beta = param_rng.uniform(spec.beta_min, spec.beta_max);
    scene.transmittance = transmittance_from_depth(scene.depth, scene.attenuation_beta);
    scene.observed = compose_veiled(scene.background, scene.streak_layers, scene.transmittance,
                                    scene.atmospheric_light);
  } else {
    scene.attenuation_beta = 0.0;
    scene.transmittance = Tensor::full({1, H, W}, 1.0);
    scene.observed = compose_linear(scene.background, scene.streak_layers);
  }
  return bundle;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string scene_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", index);
  return buf;
}

const char* bin_label_name(StreakBin::Label label) {
  switch (label) {
    case StreakBin::Label::small: return "small";
    case StreakBin::Label::middle: return "middle";
    default: return "large";
  }
}

StreakBin::Label parse_bin_label(const std::string& name) {
  if (name == "small") return StreakBin::Label::small;
  if (name == "middle") return StreakBin::Label::middle;
  if (name == "large") return StreakBin::Label::large;
  throw std::runtime_error("manifest: unknown bin label '" + name + "'");
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& file) {
  std::ostringstream out;
  out << "DRMAN " << manifest.version << "\n";
  const RainSceneSpec& s = manifest.spec;
  out << "spec seed " << s.seed << "\n";
  out << "spec size " << s.height << " " << s.width << "\n";
  out << "spec veil " << (s.veil_enabled ? 1 : 0) << "\n";
  out << "spec beta " << format_double(s.beta_min) << " " << format_double(s.beta_max) << "\n";
  out << "spec atmospheric " << format_double(s.atmospheric_min) << " "
      << format_double(s.atmospheric_max) << "\n";
  out << "spec background " << s.background_kind << "\n";
  out << "spec depth " << s.depth_kind << "\n";
  out << "spec orientations";
  for (double a : s.orientations_deg) out << " " << format_double(a);
  out << "\n";
  for (const auto& b : s.bins) {
    out << "spec bin " << bin_label_name(b.bin.label) << " " << format_double(b.bin.area_lo) << " "
        << format_double(b.bin.area_hi) << " " << b.count_min << " " << b.count_max << " "
        << format_double(b.intensity_min) << " " << format_double(b.intensity_max) << "\n";
  }
  for (const auto& e : manifest.entries) {
    out << "scene " << e.id << " " << e.seed << " " << e.height << " " << e.width << " "
        << (e.veil ? 1 : 0) << " " << format_double(e.beta) << " " << format_double(e.atmospheric)
        << " " << e.layer_paths.size() << " " << e.observed_path << " " << e.background_path << " "
        << e.alpha_path << " " << e.depth_path;
    for (const auto& p : e.layer_paths) out << " " << p;
    out << "\n";
  }
  for (const auto& e : manifest.entries) {
    for (const auto& st : e.streaks) {
      out << "streak " << e.id << " " << st.bin_index << " " << st.area_px << " "
          << format_double(st.angle_deg) << " " << format_double(st.peak) << "\n";
    }
  }
  std::ofstream f(file, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_manifest: cannot open for writing: " + file.string());
  const std::string text = out.str();
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("save_manifest: write failed: " + file.string());
}

DatasetManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("load_manifest: cannot open: " + file.string());
  DatasetManifest manifest;
  manifest.root = file.parent_path();
  manifest.spec.bins.clear();
  manifest.spec.orientations_deg.clear();

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_manifest: empty file: " + file.string());
  {
    std::istringstream head(line);
    std::string magic;
    head >> magic >> manifest.version;
    if (magic != "DRMAN" || manifest.version != 1) {
      throw std::runtime_error("load_manifest: unsupported header '" + line + "' in " +
                               file.string());
    }
  }

  std::unordered_map<std::string, size_t> entry_index;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "spec") {
      std::string key;
      ls >> key;
      RainSceneSpec& s = manifest.spec;
      if (key == "seed") {
        ls >> s.seed;
      } else if (key == "size") {
        ls >> s.height >> s.width;
      } else if (key == "veil") {
        int v = 0;
        ls >> v;
        s.veil_enabled = v != 0;
      } else if (key == "beta") {
        ls >> s.beta_min >> s.beta_max;
      } else if (key == "atmospheric") {
        ls >> s.atmospheric_min >> s.atmospheric_max;
      } else if (key == "background") {
        ls >> s.background_kind;
      } else if (key == "depth") {
        ls >> s.depth_kind;
      } else if (key == "orientations") {
        double a;
        while (ls >> a) s.orientations_deg.push_back(a);
      } else if (key == "bin") {
        BinSpec b;
        std::string label;
        ls >> label >> b.bin.area_lo >> b.bin.area_hi >> b.count_min >> b.count_max >>
            b.intensity_min >> b.intensity_max;
        b.bin.label = parse_bin_label(label);
        s.bins.push_back(b);
      } else {
        throw std::runtime_error("load_manifest: unknown spec key '" + key + "' in " +
                                 file.string());
      }
    } else if (kind == "scene") {
      ManifestEntry e;
      size_t layer_count = 0;
      int veil = 0;
      ls >> e.id >> e.seed >> e.height >> e.width >> veil >> e.beta >> e.atmospheric >>
          layer_count >> e.observed_path >> e.background_path >> e.alpha_path >> e.depth_path;
      e.veil = veil != 0;
      for (size_t i = 0; i < layer_count; ++i) {
        std::string p;
        ls >> p;
        e.layer_paths.push_back(p);
      }
      if (!ls) throw std::runtime_error("load_manifest: malformed scene record: " + line);
      entry_index[e.id] = manifest.entries.size();
      manifest.entries.push_back(std::move(e));
    } else if (kind == "streak") {
      std::string id;
      StreakRecord st;
      ls >> id >> st.bin_index >> st.area_px >> st.angle_deg >> st.peak;
      if (!ls) throw std::runtime_error("load_manifest: malformed streak record: " + line);
      auto it = entry_index.find(id);
      if (it == entry_index.end()) {
        throw std::runtime_error("load_manifest: streak record for unknown scene " + id);
      }
      manifest.entries[it->second].streaks.push_back(st);
    } else {
      throw std::runtime_error("load_manifest: unknown record '" + kind + "' in " + file.string());
    }
  }
  return manifest;
}

DatasetManifest generate_dataset(const RainSceneSpec& spec_template, int count,
                                 const std::filesystem::path& out_dir) {
  if (count < 0) throw std::invalid_argument("generate_dataset: negative count");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec && !std::filesystem::is_directory(out_dir)) {
    throw std::runtime_error("generate_dataset: cannot create directory: " + out_dir.string());
  }

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.spec = spec_template;
  manifest.entries.resize(static_cast<size_t>(count));

  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
  parallel_for(0, count, [&](int i) {
    try {
      RainSceneSpec spec = spec_template;
      spec.seed = split_seed(spec_template.seed, kStreamSceneBase + static_cast<std::uint64_t>(i));
      SceneBundle bundle = render_scene(spec);

      const std::string id = scene_id(i);
      ManifestEntry& e = manifest.entries[static_cast<size_t>(i)];
      e.id = id;
      e.seed = spec.seed;
      e.height = spec.height;
      e.width = spec.width;
      e.veil = spec.veil_enabled;
      e.beta = bundle.scene.attenuation_beta;
      e.atmospheric = bundle.scene.atmospheric_light.value();
      e.streaks = bundle.streaks;

      auto write = [&](const std::string& suffix, const Tensor& t) {
        const std::string name = id + "_" + suffix + ".drf";
        save_raw_tensor(out_dir / name, t);
        return name;
      };
      e.observed_path = write("O", bundle.scene.observed);
      e.background_path = write("B", bundle.scene.background);
      if (spec.veil_enabled) {
        e.alpha_path = write("alpha", bundle.scene.transmittance);
        e.depth_path = write("depth", bundle.scene.depth);
      } else {
        e.alpha_path = "-";
        e.depth_path = "-";
      }
      for (size_t r = 0; r < bundle.scene.streak_layers.size(); ++r) {
        e.layer_paths.push_back(write("R" + std::to_string(r + 1), bundle.scene.streak_layers[r]));
      }
      save_png(out_dir / (id + "_O.png"), bundle.scene.observed);
      save_png(out_dir / (id + "_B.png"), bundle.scene.background);
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  });
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  save_manifest(manifest, out_dir / "manifest.txt");
  return manifest;
}

RainScene load_scene(const DatasetManifest& manifest, size_t index) {
  if (index >= manifest.entries.size()) {
    throw std::out_of_range("load_scene: index out of range");
  }
  const ManifestEntry& e = manifest.entries[index];
  RainScene scene;
  scene.observed = load_raw_tensor(manifest.root / e.observed_path);
  scene.background = load_raw_tensor(manifest.root / e.background_path);
  for (const auto& p : e.layer_paths) {
    scene.streak_layers.push_back(load_raw_tensor(manifest.root / p));
  }
  if (e.alpha_path != "-") {
    scene.transmittance = load_raw_tensor(manifest.root / e.alpha_path);
  } else {
    scene.transmittance = Tensor::full({1, e.height, e.width}, 1.0);
  }
  if (e.depth_path != "-") {
    scene.depth = load_raw_tensor(manifest.root / e.depth_path);
  }
  scene.atmospheric_light = Tensor::scalar(e.atmospheric);
  scene.attenuation_beta = e.beta;
  return scene;
}

std::vector<std::string> verify_corpus(const DatasetManifest& manifest) {
  std::vector<std::string> issues;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const ManifestEntry& e = manifest.entries[i];
    RainScene scene;
    try {
      scene = load_scene(manifest, i);
    } catch (const std::exception& ex) {
      issues.push_back("scene " + e.id + ": " + ex.what());
      continue;
    }
    for (const auto& issue : verify_scene(scene)) {
      issues.push_back("scene " + e.id + ": " + issue);
    }
    const auto& bins = manifest.spec.bins;
    for (const auto& st : e.streaks) {
      if (st.bin_index < 0 || st.bin_index >= static_cast<int>(bins.size())) {
        issues.push_back("scene " + e.id + ": streak with invalid bin index");
        continue;
      }
      const StreakBin& bin = bins[static_cast<size_t>(st.bin_index)].bin;
      if (!bin.contains(static_cast<double>(st.area_px))) {
        issues.push_back("scene " + e.id + ": streak area " + std::to_string(st.area_px) +
                         " outside bin '" + bin.name() + "'");
      }
    }
  }
  return issues;
}

}  // namespace derain
