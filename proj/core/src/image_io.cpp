#include "derain/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace derain {
namespace {

constexpr char kMagic[4] = {'D', 'R', 'F', '1'};

void put_u32le(std::vector<unsigned char>& buf, std::uint32_t v) {
  buf.push_back(static_cast<unsigned char>(v & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

[[noreturn]] void io_fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(what + ": " + path.string());
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void save_raw_tensor(const std::filesystem::path& path, const Tensor& t) {
  if (t.rank() > 3) {
    throw std::invalid_argument("save_raw_tensor: rank above 3 unsupported, shape " +
                                shape_str(t.shape()));
  }
  Shape dims = {1, 1, 1};
  for (int i = 0; i < t.rank(); ++i) dims[static_cast<size_t>(3 - t.rank() + i)] = t.dim(i);

  std::vector<unsigned char> buf;
  buf.reserve(16 + t.data().size() * 8);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  for (int d : dims) put_u32le(buf, static_cast<std::uint32_t>(d));
  for (double v : t.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) buf.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xff));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail(path, "save_raw_tensor: cannot open for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) io_fail(path, "save_raw_tensor: write failed");
}

Tensor load_raw_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "load_raw_tensor: cannot open");
  unsigned char header[16];
  in.read(reinterpret_cast<char*>(header), 16);
  if (!in || std::memcmp(header, kMagic, 4) != 0) {
    io_fail(path, "load_raw_tensor: bad magic");
  }
  const std::uint32_t c = get_u32le(header + 4);
  const std::uint32_t h = get_u32le(header + 8);
  const std::uint32_t w = get_u32le(header + 12);
  if (c == 0 || h == 0 || w == 0 || 1ULL * c * h * w > (1ULL << 28)) {
    io_fail(path, "load_raw_tensor: implausible extents");
  }
  const size_t n = static_cast<size_t>(c) * h * w;
  std::vector<unsigned char> raw(n * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) io_fail(path, "load_raw_tensor: truncated payload");

  std::vector<double> values(n);
  for (size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | raw[i * 8 + static_cast<size_t>(b)];
    values[i] = std::bit_cast<double>(bits);
  }
  return Tensor::from_data({static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)},
                           std::move(values));
}

void save_png(const std::filesystem::path& path, const Tensor& t) {
  if (t.rank() != 3 || (t.dim(0) != 1 && t.dim(0) != 3)) {
    throw std::invalid_argument("save_png: expected (1,H,W) or (3,H,W), got " +
                                shape_str(t.shape()));
  }
  const int C = t.dim(0), H = t.dim(1), W = t.dim(2);

  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) io_fail(path, "save_png: cannot open for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) io_fail(path, "save_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    io_fail(path, "save_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    io_fail(path, "save_png: encode failed");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
               C == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> row(static_cast<size_t>(W) * C);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        const double v = std::clamp(t.at(c, y, x), 0.0, 1.0);
        row[static_cast<size_t>(x) * C + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor load_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) io_fail(path, "load_png: cannot open");

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    io_fail(path, "load_png: not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) io_fail(path, "load_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    io_fail(path, "load_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    io_fail(path, "load_png: decode failed");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int W = static_cast<int>(png_get_image_width(png, info));
  const int H = static_cast<int>(png_get_image_height(png, info));
  const int channels = static_cast<int>(png_get_channels(png, info));
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    io_fail(path, "load_png: unsupported channel count " + std::to_string(channels));
  }

  std::vector<unsigned char> pixels(static_cast<size_t>(H) * W * channels);
  std::vector<png_bytep> rows(static_cast<size_t>(H));
  for (int y = 0; y < H; ++y) {
    rows[static_cast<size_t>(y)] = pixels.data() + static_cast<size_t>(y) * W * channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<double> values(static_cast<size_t>(3) * H * W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int src = channels == 3 ? c : 0;
        values[(static_cast<size_t>(c) * H + y) * W + x] =
            pixels[(static_cast<size_t>(y) * W + x) * channels + static_cast<size_t>(src)] / 255.0;
      }
    }
  }
  return Tensor::from_data({3, H, W}, std::move(values));
}

}  // namespace derain
