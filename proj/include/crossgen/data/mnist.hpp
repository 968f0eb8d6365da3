#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "crossgen/tensor/tensor.hpp"

namespace crossgen::data {

inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

struct ImageSample {
  std::array<std::uint8_t, kImagePixels> pixels{};  // value = byte / 255
  int label = -1;

  friend bool operator==(const ImageSample&, const ImageSample&) = default;
};

// [1, 28, 28] floats in [0, 1].
tensor::Tensor image_tensor(const ImageSample& image);

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Either may be gzip-compressed.
std::vector<ImageSample> load_mnist_idx(const std::filesystem::path& images_path,
                                        const std::filesystem::path& labels_path);

// Writes uncompressed IDX files; used to build fixtures.
void write_mnist_idx(std::span<const ImageSample> images, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path);

// Locates train-images-idx3-ubyte[.gz] style files inside a directory.
struct MnistFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};
MnistFiles find_mnist_files(const std::filesystem::path& dir);

}  // namespace crossgen::data
