#include "derain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "derain/constants.hpp"
#include "derain/image_io.hpp"
#include "derain/parallel.hpp"

namespace derain {
namespace {

void require_same_shape(const char* op, const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) {
    throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(x.shape()) + " and " +
                                shape_str(y.shape()) + " differ");
  }
}

std::vector<double> gaussian_window() {
  std::vector<double> w(static_cast<size_t>(kSsimWindow) * kSsimWindow);
  const int half = kSsimWindow / 2;
  double total = 0.0;
  for (int y = 0; y < kSsimWindow; ++y) {
    for (int x = 0; x < kSsimWindow; ++x) {
      const double dy = y - half, dx = x - half;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
      w[static_cast<size_t>(y) * kSsimWindow + x] = v;
      total += v;
    }
  }
  for (auto& v : w) v /= total;
  return w;
}

double ssim_channel(const double* x, const double* y, int H, int W) {
  static const std::vector<double> window = gaussian_window();
  constexpr double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  constexpr double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);

  double acc = 0.0;
  long long positions = 0;
  for (int oy = 0; oy + kSsimWindow <= H; ++oy) {
    for (int ox = 0; ox + kSsimWindow <= W; ++ox) {
      double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
      for (int wy = 0; wy < kSsimWindow; ++wy) {
        const double* xr = x + static_cast<size_t>(oy + wy) * W + ox;
        const double* yr = y + static_cast<size_t>(oy + wy) * W + ox;
        const double* wr = window.data() + static_cast<size_t>(wy) * kSsimWindow;
        for (int wx = 0; wx < kSsimWindow; ++wx) {
          const double xv = xr[wx], yv = yr[wx], wv = wr[wx];
          mx += wv * xv;
          my += wv * yv;
          mxx += wv * xv * xv;
          myy += wv * yv * yv;
          mxy += wv * xv * yv;
        }
      }
      const double vx = mxx - mx * mx;
      const double vy = myy - my * my;
      const double vxy = mxy - mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * vxy + c2);
      const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      acc += num / den;
      ++positions;
    }
  }
  return acc / static_cast<double>(positions);
}

}  // namespace

double psnr(const Tensor& x, const Tensor& y) {
  require_same_shape("psnr", x, y);
  double acc = 0.0;
  const auto& xv = x.data();
  const auto& yv = y.data();
  for (size_t i = 0; i < xv.size(); ++i) {
    const double d = xv[i] - yv[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(xv.size());
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(10.0 * std::log10(1.0 / mse), kPsnrCapDb);
}

double ssim(const Tensor& x, const Tensor& y) {
  require_same_shape("ssim", x, y);
  if (x.rank() != 3) {
    throw std::invalid_argument("ssim: expected rank-3 (C,H,W) tensors, got " +
                                shape_str(x.shape()));
  }
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H < kSsimWindow || W < kSsimWindow) {
    throw std::invalid_argument("ssim: image " + std::to_string(H) + "x" + std::to_string(W) +
                                " smaller than the " + std::to_string(kSsimWindow) + "-px window");
  }
  double acc = 0.0;
  for (int c = 0; c < C; ++c) {
    acc += ssim_channel(x.data().data() + static_cast<size_t>(c) * H * W,
                        y.data().data() + static_cast<size_t>(c) * H * W, H, W);
  }
  return acc / C;
}

MetricReport MetricReport::from_scores(std::vector<ImageScore> scores) {
  MetricReport report;
  report.per_image = std::move(scores);
  if (report.per_image.empty()) return report;

  auto aggregate = [&](auto field) {
    MetricAggregate agg;
    agg.min = agg.max = field(report.per_image.front());
    double total = 0.0;
    for (const auto& s : report.per_image) {
      const double v = field(s);
      total += v;
      agg.min = std::min(agg.min, v);
      agg.max = std::max(agg.max, v);
    }
    agg.mean = total / static_cast<double>(report.per_image.size());
    return agg;
  };
  report.psnr_db = aggregate([](const ImageScore& s) { return s.psnr_db; });
  report.ssim = aggregate([](const ImageScore& s) { return s.ssim; });
  return report;
}

void MetricReport::write_csv(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_csv: cannot open for writing: " + file.string());
  out << "id,psnr_db,ssim\n";
  char buf[128];
  for (const auto& s : per_image) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", s.id.c_str(), s.psnr_db, s.ssim);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_csv: write failed: " + file.string());
}

MetricReport evaluate_corpus(const DatasetManifest& manifest,
                             const std::filesystem::path& restored_dir) {
  std::vector<std::filesystem::path> restored_paths(manifest.entries.size());
  std::vector<std::string> missing;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const std::string& id = manifest.entries[i].id;
    const auto raw = restored_dir / (id + "_derained.drf");
    const auto png = restored_dir / (id + "_derained.png");
    if (std::filesystem::exists(raw)) {
      restored_paths[i] = raw;
    } else if (std::filesystem::exists(png)) {
      restored_paths[i] = png;
    } else {
      missing.push_back(id);
    }
  }
  if (!missing.empty()) {
    std::string msg = "evaluate_corpus: missing restored images in " + restored_dir.string() + ":";
    for (const auto& id : missing) msg += " " + id;
    throw std::runtime_error(msg);
  }

  std::vector<ImageScore> scores(manifest.entries.size());
  std::vector<std::exception_ptr> errors(manifest.entries.size());
  parallel_for(0, static_cast<int>(manifest.entries.size()), [&](int i) {
    try {
      const auto& path = restored_paths[static_cast<size_t>(i)];
      const Tensor restored =
          path.extension() == ".drf" ? load_raw_tensor(path) : load_png(path);
      const Tensor truth =
          load_raw_tensor(manifest.root / manifest.entries[static_cast<size_t>(i)].background_path);
      ImageScore& s = scores[static_cast<size_t>(i)];
      s.id = manifest.entries[static_cast<size_t>(i)].id;
      s.psnr_db = psnr(restored, truth);
      s.ssim = ssim(restored, truth);
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  });
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return MetricReport::from_scores(std::move(scores));
}

}  // namespace derain
