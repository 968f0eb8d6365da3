#pragma once

#include <cstdint>
#include <filesystem>

#include "crossgen/data/align.hpp"

namespace crossgen::data {

inline constexpr std::uint16_t kPairFileVersion = 1;

// Little-endian AIPX container:
//   "AIPX" | u16 version | u8 mapping_kind | u8 split | u64 seed | u32 count
//   count x (u8 label | 784 image bytes | 2304 f32 spectrogram)
//   count x (u32 image_source | u32-length source_id)
//   u32 CRC32 of everything above
// Written atomically; returns the CRC.
std::uint32_t write_pairset(const std::filesystem::path& path, const PairSet& set);

// Verifies magic, version, ranges and CRC before returning anything.
// Spectrograms sharing a source_id are stored once.
PairSet read_pairset(const std::filesystem::path& path);

}  // namespace crossgen::data
