#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "crossgen/data/align.hpp"
#include "crossgen/data/mnist.hpp"

namespace crossgen::fixtures {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const char* tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Digit-like images: a class-specific stroke pattern plus per-sample jitter.
std::vector<data::ImageSample> synthetic_digits(std::size_t per_class, std::uint64_t seed);

// Writes the four MNIST IDX files into `dir`.
void write_mnist_dir(const std::filesystem::path& dir, std::size_t train_per_class, std::size_t test_per_class,
                     std::uint64_t seed);

// A spoken digit stand-in: a chirp whose pitch depends on the digit and speaker.
std::vector<float> synthetic_utterance(int digit, int speaker, int take, int sample_rate);

// "{digit}_{speaker}_{take}.wav" files at 8 kHz.
void write_fsdd_dir(const std::filesystem::path& dir, int speakers, int takes);

// zero..nine folders at 16 kHz plus a non-digit "yes" folder.
void write_scd_dir(const std::filesystem::path& dir, int per_word);

// Aligned pairs built from synthetic digits and synthetic utterances
// (`clips_per_class` recordings per digit at 8 kHz).
data::PairSet small_pairset(std::size_t images_per_class, std::size_t clips_per_class, data::MappingKind kind,
                            std::uint64_t seed);

}  // namespace crossgen::fixtures
