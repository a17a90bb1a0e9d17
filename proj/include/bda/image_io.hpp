#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bda/mask.hpp"
#include "bda/tensor.hpp"

namespace bda {

// 8-bit PNG pixels, interleaved, channels in {1, 3}.
struct PngImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

// Reads any 8-bit-or-less PNG, expanding palette/gray/alpha variants to gray
// (1 channel) or RGB (3 channels). Throws DataError on failure.
PngImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const PngImage& img);

// RGB image as a 3 x H x W tensor scaled to [0, 1]. Grayscale files are
// replicated across channels.
Tensor load_rgb(const std::filesystem::path& path);
void save_rgb(const std::filesystem::path& path, const Tensor& chw);

// Single-channel mask with raw label values (not color mapped).
Mask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const Mask& m);

}  // namespace bda
