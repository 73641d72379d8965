#include "ssc/io/png.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <memory>

namespace ssc::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open(const std::filesystem::path& path, const char* mode) {
  if (mode[0] == 'w' && path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void on_png_error(png_structp, png_const_charp msg) {
  throw IoError(std::string("libpng: ") + msg);
}
void on_png_warning(png_structp, png_const_charp) {}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : file_(open(path, "wb")) {
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error,
                                   on_png_warning);
    if (!png_) throw IoError("png_create_write_struct failed");
    info_ = png_create_info_struct(png_);
    png_init_io(png_, file_.get());
    // No timestamps or text chunks: identical inputs give identical bytes.
    png_set_compression_level(png_, 6);
  }
  ~Writer() { png_destroy_write_struct(&png_, &info_); }
  png_structp png() { return png_; }
  png_infop info() { return info_; }

  void write_rows(int height, std::size_t row_bytes, const std::uint8_t* data) {
    png_write_info(png_, info_);
    for (int y = 0; y < height; ++y)
      png_write_row(png_, const_cast<png_bytep>(data + row_bytes * y));
    png_write_end(png_, nullptr);
  }

 private:
  FilePtr file_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;
};

/// Reads any PNG; palette images are returned as raw indices when
/// `keep_palette` is set, otherwise expanded to RGB.
Decoded decode(const std::filesystem::path& path, bool keep_palette) {
  FilePtr file = open(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           on_png_error, on_png_warning);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    if (keep_palette) {
      if (depth < 8) png_set_packing(png);
    } else {
      png_set_palette_to_rgb(png);
    }
  }
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);

  Decoded d;
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.channels = png_get_channels(png, info);
  d.bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  d.bytes.resize(row_bytes * d.height);
  for (int y = 0; y < d.height; ++y) png_read_row(png, d.bytes.data() + row_bytes * y, nullptr);
  png_read_end(png, nullptr);
  return d;
}

}  // namespace

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
  std::vector<std::uint8_t> rows(3u * image.width * image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        rows[(static_cast<std::size_t>(y) * image.width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  Writer w(path);
  png_set_IHDR(w.png(), w.info(), image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  w.write_rows(image.height, 3u * image.width, rows.data());
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
  Decoded d = decode(path, false);
  if (d.bit_depth != 8 || (d.channels != 3 && d.channels != 4))
    throw IoError(path.string() + ": expected an 8-bit RGB image");
  RgbImage img(d.width, d.height);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) =
            d.bytes[(static_cast<std::size_t>(y) * d.width + x) * d.channels + c] / 255.0f;
  return img;
}

void write_palette_png(const std::filesystem::path& path,
                       const Grid<std::uint8_t>& indices,
                       std::span<const std::array<std::uint8_t, 3>> palette) {
  if (palette.empty() || palette.size() > 256) throw IoError("bad palette size");
  std::vector<png_color> colors;
  for (const auto& p : palette) colors.push_back({p[0], p[1], p[2]});
  for (std::uint8_t v : indices.cells())
    if (v >= palette.size()) throw IoError("palette index out of range");
  Writer w(path);
  png_set_IHDR(w.png(), w.info(), indices.cols(), indices.rows(), 8,
               PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_PLTE(w.png(), w.info(), colors.data(), static_cast<int>(colors.size()));
  w.write_rows(indices.rows(), indices.cols(), indices.cells().data());
}

Grid<std::uint8_t> read_index_png(const std::filesystem::path& path) {
  Decoded d = decode(path, true);
  if (d.bit_depth != 8 || d.channels != 1)
    throw IoError(path.string() + ": expected an 8-bit indexed or gray image");
  Grid<std::uint8_t> g(d.height, d.width);
  std::copy(d.bytes.begin(), d.bytes.end(), g.cells().begin());
  return g;
}

void write_gray16_png(const std::filesystem::path& path,
                      const Grid<std::uint16_t>& values) {
  std::vector<std::uint8_t> rows(2u * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows[2 * i] = static_cast<std::uint8_t>(values[i] >> 8);  // PNG is big-endian
    rows[2 * i + 1] = static_cast<std::uint8_t>(values[i] & 0xff);
  }
  Writer w(path);
  png_set_IHDR(w.png(), w.info(), values.cols(), values.rows(), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  w.write_rows(values.rows(), 2u * values.cols(), rows.data());
}

Grid<std::uint16_t> read_gray16_png(const std::filesystem::path& path) {
  Decoded d = decode(path, false);
  if (d.bit_depth != 16 || d.channels != 1)
    throw IoError(path.string() + ": expected a 16-bit grayscale image");
  Grid<std::uint16_t> g(d.height, d.width);
  std::memcpy(g.cells().data(), d.bytes.data(), d.bytes.size());
  return g;
}

}  // namespace ssc::io
