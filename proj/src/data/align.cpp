#include "crossgen/data/align.hpp"

#include <fmt/format.h>

#include <array>

#include "crossgen/util/errors.hpp"

namespace crossgen::data {
namespace {

using ClassIndex = std::array<std::vector<std::uint32_t>, 10>;

template <typename T, typename LabelOf>
ClassIndex by_class(const std::vector<T>& items, LabelOf label_of, const char* what) {
  ClassIndex out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const int label = label_of(items[i]);
    if (label < 0 || label > 9) throw Error(fmt::format("{} {} has label {} outside 0..9", what, i, label));
    out[static_cast<std::size_t>(label)].push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

void shuffle(std::vector<std::uint32_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

// Copies the referenced spectrograms into the set, keeping first-use order.
void gather(PairSet& set, const std::vector<ImageSample>& images, const std::vector<audio::Spectrogram>& spectrograms,
            const std::vector<std::pair<std::uint32_t, std::uint32_t>>& chosen) {
  std::vector<std::int64_t> remap(spectrograms.size(), -1);
  set.images.reserve(chosen.size());
  set.image_source.reserve(chosen.size());
  set.pairs.reserve(chosen.size());
  for (const auto& [img, spec] : chosen) {
    if (remap[spec] < 0) {
      remap[spec] = static_cast<std::int64_t>(set.spectrograms.size());
      set.spectrograms.push_back(spectrograms[spec]);
    }
    set.pairs.push_back({static_cast<std::uint32_t>(set.images.size()), static_cast<std::uint32_t>(remap[spec])});
    set.images.push_back(images[img]);
    set.image_source.push_back(img);
  }
}

}  // namespace

std::string to_string(MappingKind kind) { return kind == MappingKind::many_to_one ? "many_to_one" : "one_to_one"; }
std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

PairSet align_many_to_one(const std::vector<ImageSample>& images, const std::vector<audio::Spectrogram>& spectrograms,
                          std::uint64_t seed, Split split) {
  const auto spec_classes = by_class(spectrograms, [](const auto& s) { return s.label; }, "spectrogram");
  const auto image_classes = by_class(images, [](const auto& s) { return s.label; }, "image");
  for (int c = 0; c < 10; ++c) {
    if (!image_classes[c].empty() && spec_classes[c].empty()) {
      throw Error(fmt::format("class {} has images but no spectrograms", c));
    }
  }
  Rng rng(seed);
  std::vector<std::uint32_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  shuffle(order, rng);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> chosen;
  chosen.reserve(order.size());
  for (auto img : order) {
    const auto& pool = spec_classes[static_cast<std::size_t>(images[img].label)];
    chosen.emplace_back(img, pool[rng.uniform_index(pool.size())]);
  }
  PairSet set;
  set.mapping_kind = MappingKind::many_to_one;
  set.split = split;
  set.seed = seed;
  gather(set, images, spectrograms, chosen);
  return set;
}

PairSet align_one_to_one(const std::vector<ImageSample>& images, const std::vector<audio::Spectrogram>& spectrograms,
                         std::uint64_t seed, Split split) {
  auto spec_classes = by_class(spectrograms, [](const auto& s) { return s.label; }, "spectrogram");
  auto image_classes = by_class(images, [](const auto& s) { return s.label; }, "image");
  for (int c = 0; c < 10; ++c) {
    if (spec_classes[c].empty() || image_classes[c].empty()) {
      throw Error(fmt::format("class {} is empty ({} spectrograms, {} images)", c, spec_classes[c].size(),
                              image_classes[c].size()));
    }
  }
  Rng rng(seed);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> chosen;
  for (std::size_t c = 0; c < 10; ++c) {
    shuffle(spec_classes[c], rng);
    shuffle(image_classes[c], rng);
    const std::size_t n = std::min(spec_classes[c].size(), image_classes[c].size());
    for (std::size_t i = 0; i < n; ++i) chosen.emplace_back(image_classes[c][i], spec_classes[c][i]);
  }
  PairSet set;
  set.mapping_kind = MappingKind::one_to_one;
  set.split = split;
  set.seed = seed;
  gather(set, images, spectrograms, chosen);
  return set;
}

}  // namespace crossgen::data
