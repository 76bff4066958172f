#include "derain/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace derain {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::filesystem::path& path, int line_no, const std::string& msg) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + msg);
}

struct Assignment {
  std::string section;
  std::string key;
  std::string value;
  int line_no;
};

long long parse_int(const std::filesystem::path& p, const Assignment& a) {
  try {
    size_t used = 0;
    const long long v = std::stoll(a.value, &used);
    if (used != a.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    fail(p, a.line_no, "key '" + a.key + "' expects an integer, got '" + a.value + "'");
  }
}

double parse_double(const std::filesystem::path& p, const Assignment& a) {
  try {
    size_t used = 0;
    const double v = std::stod(a.value, &used);
    if (used != a.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    fail(p, a.line_no, "key '" + a.key + "' expects a number, got '" + a.value + "'");
  }
}

bool parse_bool(const std::filesystem::path& p, const Assignment& a) {
  if (a.value == "true" || a.value == "on" || a.value == "1") return true;
  if (a.value == "false" || a.value == "off" || a.value == "0") return false;
  fail(p, a.line_no, "key '" + a.key + "' expects true/false, got '" + a.value + "'");
}

std::vector<double> parse_double_list(const std::filesystem::path& p, const Assignment& a) {
  std::vector<double> out;
  std::istringstream ss(a.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(p, a.line_no, "key '" + a.key + "' has an empty list item");
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      fail(p, a.line_no, "key '" + a.key + "' expects comma-separated numbers");
    }
  }
  return out;
}

std::vector<double> spaced_orientations(int count, double span) {
  std::vector<double> angles;
  if (count == 1) {
    angles.push_back(0.0);
    return angles;
  }
  for (int i = 0; i < count; ++i) {
    angles.push_back(-span + 2.0 * span * i / (count - 1));
  }
  return angles;
}

int bin_index_for(const std::string& name) {
  if (name == "small") return 0;
  if (name == "middle") return 1;
  if (name == "large") return 2;
  return -1;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig default_run_config() {
  RunConfig config;
  config.scene = default_scene_spec(64, 64, false);
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_run_config: cannot open: " + path.string());

  std::vector<Assignment> assignments;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    if (text.front() == '[') {
      if (text.back() != ']') fail(path, line_no, "malformed section header '" + text + "'");
      section = text.substr(1, text.size() - 2);
      if (section != "network" && section != "scene" && section != "train") {
        fail(path, line_no, "unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(path, line_no, "expected 'key = value', got '" + text + "'");
    if (section.empty()) fail(path, line_no, "assignment before any [section] header");
    Assignment a;
    a.section = section;
    a.key = trim(text.substr(0, eq));
    a.value = trim(text.substr(eq + 1));
    a.line_no = line_no;
    if (a.key.empty() || a.value.empty()) fail(path, line_no, "empty key or value");
    assignments.push_back(std::move(a));
  }

  RunConfig config = default_run_config();

  // First pass: everything that shapes the scene defaults (size, veil),
  // plus network and training keys.
  int scene_h = config.scene.height, scene_w = config.scene.width;
  bool scene_veil = config.scene.veil_enabled;
  std::vector<const Assignment*> bin_overrides;

  for (const auto& a : assignments) {
    if (a.section == "network") {
      NetworkConfig& n = config.network;
      if (a.key == "scale_bins") n.scale_bins = static_cast<int>(parse_int(path, a));
      else if (a.key == "recurrent_iters") n.recurrent_iters = static_cast<int>(parse_int(path, a));
      else if (a.key == "stages") n.stages = static_cast<int>(parse_int(path, a));
      else if (a.key == "features") n.features = static_cast<int>(parse_int(path, a));
      else if (a.key == "dense_layers") n.dense_layers = static_cast<int>(parse_int(path, a));
      else if (a.key == "growth") n.growth = static_cast<int>(parse_int(path, a));
      else if (a.key == "kernel") n.kernel = static_cast<int>(parse_int(path, a));
      else if (a.key == "veil") n.veil_enabled = parse_bool(path, a);
      else if (a.key == "shared_stages") n.shared_stages = parse_bool(path, a);
      else if (a.key == "seed") n.seed = static_cast<std::uint64_t>(parse_int(path, a));
      else fail(path, a.line_no, "unknown [network] key '" + a.key + "'");
    } else if (a.section == "train") {
      TrainOptions& t = config.train;
      if (a.key == "epochs") t.epochs = static_cast<int>(parse_int(path, a));
      else if (a.key == "batch_size") t.batch_size = static_cast<int>(parse_int(path, a));
      else if (a.key == "learning_rate") t.optimizer.learning_rate = parse_double(path, a);
      else if (a.key == "beta1") t.optimizer.beta1 = parse_double(path, a);
      else if (a.key == "beta2") t.optimizer.beta2 = parse_double(path, a);
      else if (a.key == "epsilon") t.optimizer.epsilon = parse_double(path, a);
      else if (a.key == "shuffle_seed") t.shuffle_seed = static_cast<std::uint64_t>(parse_int(path, a));
      else if (a.key == "stage_weights") t.stage_weights = parse_double_list(path, a);
      else if (a.key == "optimizer") {
        if (a.value == "adam") t.optimizer.kind = OptimizerConfig::Kind::adam;
        else if (a.value == "sgd") t.optimizer.kind = OptimizerConfig::Kind::sgd;
        else fail(path, a.line_no, "optimizer must be adam or sgd, got '" + a.value + "'");
      } else {
        fail(path, a.line_no, "unknown [train] key '" + a.key + "'");
      }
    } else {  // scene
      if (a.key == "image_h") scene_h = static_cast<int>(parse_int(path, a));
      else if (a.key == "image_w") scene_w = static_cast<int>(parse_int(path, a));
      else if (a.key == "veil") scene_veil = parse_bool(path, a);
      else if (a.key == "seed" || a.key == "beta_min" || a.key == "beta_max" ||
               a.key == "atmospheric_min" || a.key == "atmospheric_max" ||
               a.key == "orientation_count" || a.key == "orientation_span_deg" ||
               a.key == "background" || a.key == "depth") {
        // handled after defaults are rebuilt
      } else {
        const auto underscore = a.key.find('_');
        const std::string bin_name = a.key.substr(0, underscore);
        if (underscore != std::string::npos && bin_index_for(bin_name) >= 0) {
          bin_overrides.push_back(&a);
        } else {
          fail(path, a.line_no, "unknown [scene] key '" + a.key + "'");
        }
      }
    }
  }

  // Rebuild scene defaults at the final size before applying overrides.
  const std::uint64_t keep_seed = config.scene.seed;
  config.scene = default_scene_spec(scene_h, scene_w, scene_veil);
  config.scene.seed = keep_seed;

  for (const auto& a : assignments) {
    if (a.section != "scene") continue;
    RainSceneSpec& s = config.scene;
    if (a.key == "seed") s.seed = static_cast<std::uint64_t>(parse_int(path, a));
    else if (a.key == "beta_min") s.beta_min = parse_double(path, a);
    else if (a.key == "beta_max") s.beta_max = parse_double(path, a);
    else if (a.key == "atmospheric_min") s.atmospheric_min = parse_double(path, a);
    else if (a.key == "atmospheric_max") s.atmospheric_max = parse_double(path, a);
    else if (a.key == "orientation_count") config.orientation_count = static_cast<int>(parse_int(path, a));
    else if (a.key == "orientation_span_deg") config.orientation_span_deg = parse_double(path, a);
    else if (a.key == "background") s.background_kind = a.value;
    else if (a.key == "depth") s.depth_kind = a.value;
  }
  config.scene.orientations_deg =
      spaced_orientations(config.orientation_count, config.orientation_span_deg);

  for (const Assignment* ap : bin_overrides) {
    const Assignment& a = *ap;
    const auto underscore = a.key.find('_');
    const int bin = bin_index_for(a.key.substr(0, underscore));
    const std::string field = a.key.substr(underscore + 1);
    if (bin >= static_cast<int>(config.scene.bins.size())) {
      fail(path, a.line_no, "bin '" + a.key.substr(0, underscore) + "' not present in scene spec");
    }
    BinSpec& b = config.scene.bins[static_cast<size_t>(bin)];
    if (field == "count_min") b.count_min = static_cast<int>(parse_int(path, a));
    else if (field == "count_max") b.count_max = static_cast<int>(parse_int(path, a));
    else if (field == "intensity_min") b.intensity_min = parse_double(path, a);
    else if (field == "intensity_max") b.intensity_max = parse_double(path, a);
    else fail(path, a.line_no, "unknown [scene] key '" + a.key + "'");
  }

  return config;
}

void write_run_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ostringstream out;
  const NetworkConfig& n = config.network;
  out << "[network]\n";
  out << "scale_bins = " << n.scale_bins << "\n";
  out << "recurrent_iters = " << n.recurrent_iters << "\n";
  out << "stages = " << n.stages << "\n";
  out << "features = " << n.features << "\n";
  out << "dense_layers = " << n.dense_layers << "\n";
  out << "growth = " << n.growth << "\n";
  out << "kernel = " << n.kernel << "\n";
  out << "veil = " << (n.veil_enabled ? "true" : "false") << "\n";
  out << "shared_stages = " << (n.shared_stages ? "true" : "false") << "\n";
  out << "seed = " << n.seed << "\n";

  const RainSceneSpec& s = config.scene;
  out << "\n[scene]\n";
  out << "seed = " << s.seed << "\n";
  out << "image_h = " << s.height << "\n";
  out << "image_w = " << s.width << "\n";
  out << "veil = " << (s.veil_enabled ? "true" : "false") << "\n";
  out << "beta_min = " << format_double(s.beta_min) << "\n";
  out << "beta_max = " << format_double(s.beta_max) << "\n";
  out << "atmospheric_min = " << format_double(s.atmospheric_min) << "\n";
  out << "atmospheric_max = " << format_double(s.atmospheric_max) << "\n";
  out << "orientation_count = " << config.orientation_count << "\n";
  out << "orientation_span_deg = " << format_double(config.orientation_span_deg) << "\n";
  out << "background = " << s.background_kind << "\n";
  out << "depth = " << s.depth_kind << "\n";
  static const char* names[] = {"small", "middle", "large"};
  for (size_t i = 0; i < s.bins.size() && i < 3; ++i) {
    const BinSpec& b = s.bins[i];
    out << names[i] << "_count_min = " << b.count_min << "\n";
    out << names[i] << "_count_max = " << b.count_max << "\n";
    out << names[i] << "_intensity_min = " << format_double(b.intensity_min) << "\n";
    out << names[i] << "_intensity_max = " << format_double(b.intensity_max) << "\n";
  }

  const TrainOptions& t = config.train;
  out << "\n[train]\n";
  out << "epochs = " << t.epochs << "\n";
  out << "batch_size = " << t.batch_size << "\n";
  out << "optimizer = " << (t.optimizer.kind == OptimizerConfig::Kind::adam ? "adam" : "sgd")
      << "\n";
  out << "learning_rate = " << format_double(t.optimizer.learning_rate) << "\n";
  out << "beta1 = " << format_double(t.optimizer.beta1) << "\n";
  out << "beta2 = " << format_double(t.optimizer.beta2) << "\n";
  out << "epsilon = " << format_double(t.optimizer.epsilon) << "\n";
  out << "shuffle_seed = " << t.shuffle_seed << "\n";
  if (!t.stage_weights.empty()) {
    out << "stage_weights = ";
    for (size_t i = 0; i < t.stage_weights.size(); ++i) {
      if (i) out << ",";
      out << format_double(t.stage_weights[i]);
    }
    out << "\n";
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_run_config: cannot open for writing: " + path.string());
  const std::string text = out.str();
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("write_run_config: write failed: " + path.string());
}

}  // namespace derain
