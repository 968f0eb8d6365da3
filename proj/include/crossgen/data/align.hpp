#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crossgen/audio/mel.hpp"
#include "crossgen/data/mnist.hpp"
#include "crossgen/util/rng.hpp"

namespace crossgen::data {

enum class MappingKind : std::uint8_t { many_to_one = 0, one_to_one = 1 };
enum class Split : std::uint8_t { train = 0, test = 1 };

std::string to_string(MappingKind kind);
std::string to_string(Split split);

struct PairIndex {
  std::uint32_t image;        // into PairSet::images
  std::uint32_t spectrogram;  // into PairSet::spectrograms
  friend bool operator==(const PairIndex&, const PairIndex&) = default;
};

// Aligned audio/image pairs. Spectrograms are stored once and referenced by
// index, so many-to-one sets do not duplicate reused clips. `image_source`
// records each image's position in the MNIST list it was drawn from.
struct PairSet {
  MappingKind mapping_kind = MappingKind::many_to_one;
  Split split = Split::train;
  std::uint64_t seed = 0;
  std::vector<audio::Spectrogram> spectrograms;
  std::vector<ImageSample> images;
  std::vector<std::uint32_t> image_source;
  std::vector<PairIndex> pairs;

  std::size_t size() const { return pairs.size(); }
  int label(std::size_t i) const { return images[pairs[i].image].label; }
  const ImageSample& image(std::size_t i) const { return images[pairs[i].image]; }
  const audio::Spectrogram& spectrogram(std::size_t i) const { return spectrograms[pairs[i].spectrogram]; }
};

// Uniform random permutation, first floor(0.9 n) items to train.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_90_10(std::vector<T> items, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.uniform_index(i)]);
  const std::size_t n_train = items.size() * 9 / 10;
  std::vector<T> test(std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(n_train)),
                      std::make_move_iterator(items.end()));
  items.resize(n_train);
  return {std::move(items), std::move(test)};
}

// Every image once, in shuffled order; each partnered with a same-label
// spectrogram drawn uniformly with replacement.
PairSet align_many_to_one(const std::vector<ImageSample>& images, const std::vector<audio::Spectrogram>& spectrograms,
                          std::uint64_t seed, Split split);

// Per class in ascending label order: both sides shuffled, first
// min(#spectrograms, #images) matched, so no spectrogram or image repeats.
PairSet align_one_to_one(const std::vector<ImageSample>& images, const std::vector<audio::Spectrogram>& spectrograms,
                         std::uint64_t seed, Split split);

}  // namespace crossgen::data
