#include "bda/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "bda/errors.hpp"

namespace bda {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

PngImage read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  std::string err;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  PngImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("cannot decode PNG '" + path.string() + "': " + err);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  img.pixels.resize(img.width * img.height * img.channels);
  rows.resize(img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    rows[y] = img.pixels.data() + y * img.width * img.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (img.channels != 1 && img.channels != 3) {
    throw DataError("unsupported PNG channel count in '" + path.string() + "'");
  }
  return img;
}

void write_png(const std::filesystem::path& path, const PngImage& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ContractError("write_png: channels must be 1 or 3");
  }
  if (img.pixels.size() != img.width * img.height * img.channels) {
    throw ContractError("write_png: pixel buffer size mismatch");
  }
  FilePtr f = open_file(path, "wb");
  std::string err;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("cannot encode PNG '" + path.string() + "': " + err);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y) {
    rows[y] = const_cast<png_bytep>(img.pixels.data() + y * img.width * img.channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor load_rgb(const std::filesystem::path& path) {
  const PngImage img = read_png(path);
  Tensor t({3, img.height, img.width});
  const std::size_t hw = img.height * img.width;
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t src = img.channels == 3 ? p * 3 + c : p;
      t[c * hw + p] = static_cast<double>(img.pixels[src]) / 255.0;
    }
  }
  return t;
}

void save_rgb(const std::filesystem::path& path, const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) {
    throw ContractError("save_rgb: expected 3 x H x W, got " + shape_str(chw.shape()));
  }
  PngImage img{chw.dim(2), chw.dim(1), 3, {}};
  const std::size_t hw = img.height * img.width;
  img.pixels.resize(hw * 3);
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(chw[c * hw + p], 0.0, 1.0);
      img.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  write_png(path, img);
}

Mask load_mask(const std::filesystem::path& path) {
  const PngImage img = read_png(path);
  if (img.channels != 1) {
    throw DataError("mask '" + path.string() + "' is not single-channel");
  }
  Mask m(img.height, img.width);
  m.values = img.pixels;
  return m;
}

void save_mask(const std::filesystem::path& path, const Mask& m) {
  write_png(path, PngImage{m.width, m.height, 1, m.values});
}

}  // namespace bda
