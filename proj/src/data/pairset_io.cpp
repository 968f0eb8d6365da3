#include "crossgen/data/pairset_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "crossgen/util/binary_io.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen::data {

std::uint32_t write_pairset(const std::filesystem::path& path, const PairSet& set) {
  if (set.pairs.size() > UINT32_MAX) throw Error("pair set too large for AIPX");
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.label(i) != set.spectrogram(i).label) {
      throw Error("pair " + std::to_string(i) + " has mismatched image/audio labels");
    }
    if (set.spectrogram(i).pixels.size() != audio::kSpectrogramPixels) {
      throw DimensionError("pair " + std::to_string(i) + " spectrogram is not 48x48");
    }
  }
  std::uint32_t crc = 0;
  write_file_atomically(path, [&](std::ostream& out) {
    BinaryWriter w(out);
    w.bytes({reinterpret_cast<const std::uint8_t*>("AIPX"), 4});
    w.u16(kPairFileVersion);
    w.u8(static_cast<std::uint8_t>(set.mapping_kind));
    w.u8(static_cast<std::uint8_t>(set.split));
    w.u64(set.seed);
    w.u32(static_cast<std::uint32_t>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) {
      w.u8(static_cast<std::uint8_t>(set.label(i)));
      w.bytes(set.image(i).pixels);
      w.f32s(set.spectrogram(i).pixels.data());
    }
    for (std::size_t i = 0; i < set.size(); ++i) {
      w.u32(set.image_source.empty() ? 0 : set.image_source[set.pairs[i].image]);
      w.str(set.spectrogram(i).source_id);
    }
    crc = w.crc();
    w.crc_trailer();
  });
  return crc;
}

PairSet read_pairset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  BinaryReader r(in, path.string());

  std::uint8_t magic[4];
  r.bytes(magic, "magic");
  if (std::memcmp(magic, "AIPX", 4) != 0) throw ParseError(path.string() + ": bad magic (not an AIPX pair file)");
  if (const auto v = r.u16("version"); v != kPairFileVersion) {
    throw ParseError(path.string() + ": unsupported AIPX version " + std::to_string(v));
  }
  PairSet set;
  const auto kind = r.u8("mapping_kind");
  const auto split = r.u8("split");
  if (kind > 1) throw ParseError(path.string() + ": bad mapping_kind " + std::to_string(kind));
  if (split > 1) throw ParseError(path.string() + ": bad split " + std::to_string(split));
  set.mapping_kind = static_cast<MappingKind>(kind);
  set.split = static_cast<Split>(split);
  set.seed = r.u64("seed");
  const std::uint32_t count = r.u32("count");

  // Guard the reservation against a corrupted count field.
  const std::size_t record = 1 + kImagePixels + 4 * audio::kSpectrogramPixels;
  if (const auto size = std::filesystem::file_size(path); count > size / record) {
    throw ParseError(path.string() + ": count " + std::to_string(count) + " exceeds file size");
  }

  std::vector<int> labels(count);
  std::vector<tensor::Tensor> pixels;
  pixels.reserve(count);
  set.images.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    labels[i] = r.u8("label");
    if (labels[i] > 9) throw ParseError(path.string() + ": label out of range in pair " + std::to_string(i));
    set.images[i].label = labels[i];
    r.bytes(set.images[i].pixels, "image");
    tensor::Tensor t({audio::kSpectrogramSide, audio::kSpectrogramSide});
    r.f32s(t.data(), "spectrogram");
    for (float v : t.data()) {
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw ParseError(path.string() + ": spectrogram value outside [0,1] in pair " + std::to_string(i));
      }
    }
    pixels.push_back(std::move(t));
  }
  std::vector<std::string> ids(count);
  set.image_source.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    set.image_source[i] = r.u32("image_source");
    ids[i] = r.str("source_id", 4096);
  }
  r.verify_crc_trailer();
  r.expect_eof();

  std::unordered_map<std::string, std::uint32_t> by_id;
  set.pairs.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [it, inserted] = by_id.emplace(ids[i], static_cast<std::uint32_t>(set.spectrograms.size()));
    if (inserted) {
      set.spectrograms.push_back({std::move(pixels[i]), labels[i], ids[i]});
    } else if (set.spectrograms[it->second].pixels != pixels[i] || set.spectrograms[it->second].label != labels[i]) {
      throw ParseError(path.string() + ": source_id " + ids[i] + " stored with differing contents");
    }
    set.pairs[i] = {i, it->second};
  }
  return set;
}

}  // namespace crossgen::data
