#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace crossgen {

struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, width*height
};

// 8-bit grayscale PNG, filter type 0 on every row.
std::vector<std::uint8_t> encode_png(const GrayImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);

// Reads back 8-bit grayscale, non-interlaced PNGs (any row filter).
GrayImage decode_png(std::span<const std::uint8_t> bytes);
GrayImage read_png(const std::filesystem::path& path);

}  // namespace crossgen
